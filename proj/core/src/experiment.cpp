#include "spxnet/experiment.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "spxnet/errors.hpp"
#include "spxnet/evaluate.hpp"
#include "spxnet/network.hpp"
#include "spxnet/visualize.hpp"
#include "spxnet/weights_io.hpp"

namespace spxnet {

namespace {

std::pair<int, int> parse_size(const std::string& key, const std::string& text) {
  const auto parts = split_list(text, 'x');
  int h = 0;
  int w = 0;
  try {
    if (parts.size() != 2) throw std::invalid_argument(text);
    std::size_t used = 0;
    h = std::stoi(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument(text);
    w = std::stoi(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw ConfigError(key + " must look like HxW, got '" + text + "'");
  }
  return {h, w};
}

std::string size_str(int h, int w) { return std::to_string(h) + "x" + std::to_string(w); }

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  return os.str();
}

std::string number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

AugmentMode augment_mode_for(const TopologySpec& t) {
  if (t.is_flow()) return AugmentMode::flow;
  return t.views() == 1 ? AugmentMode::mono : AugmentMode::stereo;
}

ResultRow baseline_row(const char* name, const Predictor& p, const Dataset& train, const Dataset& val,
                       std::uint64_t seed) {
  ResultRow r;
  r.method = name;
  r.train_epe = evaluate(p, train).mean_epe;
  r.val_epe = evaluate(p, val).mean_epe;
  r.seed = seed;
  return r;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& cfg) {
  ExperimentConfig e;
  e.topology = topology_from_config(cfg, "net.");

  e.data.manifest = cfg.get_string("data.manifest", "");
  e.data.samples = cfg.get_int("data.samples", e.data.samples);
  if (auto v = cfg.get("data.size")) std::tie(e.data.height, e.data.width) = parse_size("data.size", *v);
  e.data.seed = static_cast<std::uint64_t>(cfg.get_int("data.seed", static_cast<int>(e.data.seed)));
  e.data.val_fraction = cfg.get_double("data.val_fraction", e.data.val_fraction);

  TrainConfig& t = e.train;
  t.batch_size = cfg.get_int("train.batch_size", t.batch_size);
  t.base_lr = cfg.get_double("train.lr", t.base_lr);
  t.epochs = cfg.get_int("train.epochs", t.epochs);
  t.milestones = cfg.get_int_list("train.milestones", t.milestones);
  t.decay = cfg.get_double("train.decay", t.decay);
  t.beta1 = cfg.get_double("train.beta1", t.beta1);
  t.beta2 = cfg.get_double("train.beta2", t.beta2);
  t.adam_eps = cfg.get_double("train.eps", t.adam_eps);
  t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", 0));
  t.scale_weights = cfg.get_double_list("train.scale_weights", {});
  t.checkpoint_every = cfg.get_int("train.checkpoint_every", 0);

  AugmentConfig& a = e.augment;
  a.mode = augment_mode_for(e.topology);
  if (auto v = cfg.get("augment.crop")) std::tie(a.crop_h, a.crop_w) = parse_size("augment.crop", *v);
  a.rotate = cfg.get_bool("augment.rotate", false);
  a.translate = cfg.get_bool("augment.translate", false);
  a.hflip = cfg.get_bool("augment.hflip", false);
  a.vflip = cfg.get_bool("augment.vflip", false);
  a.max_rotation_deg = cfg.get_double("augment.max_rotation_deg", a.max_rotation_deg);
  a.max_translation = cfg.get_double("augment.max_translation", a.max_translation);
  a.probability = cfg.get_double("augment.probability", a.probability);

  e.output_dir = cfg.require("output_dir");
  if (e.train.checkpoint_every > 0) e.train.checkpoint_path = (e.output_dir / "checkpoint.spxc").string();
  e.validate();
  return e;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  try {
    return from_config(KeyValueConfig::load(path));
  } catch (const Error& err) {
    rethrow_with_context(err, path.string());
  }
}

KeyValueConfig ExperimentConfig::to_config() const {
  KeyValueConfig cfg = spxnet::to_config(topology, "net.");
  if (!data.manifest.empty()) {
    cfg.set("data.manifest", data.manifest);
  } else {
    cfg.set("data.samples", std::to_string(data.samples));
    cfg.set("data.size", size_str(data.height, data.width));
  }
  cfg.set("data.seed", std::to_string(data.seed));
  cfg.set("data.val_fraction", number(data.val_fraction));
  cfg.set("train.batch_size", std::to_string(train.batch_size));
  cfg.set("train.lr", number(train.base_lr));
  cfg.set("train.epochs", std::to_string(train.epochs));
  cfg.set("train.milestones", join(train.milestones));
  cfg.set("train.decay", number(train.decay));
  cfg.set("train.beta1", number(train.beta1));
  cfg.set("train.beta2", number(train.beta2));
  cfg.set("train.eps", number(train.adam_eps));
  cfg.set("train.seed", std::to_string(train.seed));
  if (!train.scale_weights.empty()) {
    std::vector<std::string> w;
    for (double x : train.scale_weights) w.push_back(number(x));
    cfg.set("train.scale_weights", join(w));
  }
  cfg.set("train.checkpoint_every", std::to_string(train.checkpoint_every));
  if (augment.crop_h > 0) cfg.set("augment.crop", size_str(augment.crop_h, augment.crop_w));
  cfg.set("augment.rotate", augment.rotate ? "true" : "false");
  cfg.set("augment.translate", augment.translate ? "true" : "false");
  cfg.set("augment.hflip", augment.hflip ? "true" : "false");
  cfg.set("augment.vflip", augment.vflip ? "true" : "false");
  cfg.set("augment.max_rotation_deg", number(augment.max_rotation_deg));
  cfg.set("augment.max_translation", number(augment.max_translation));
  cfg.set("augment.probability", number(augment.probability));
  cfg.set("output_dir", output_dir.string());
  return cfg;
}

void ExperimentConfig::validate() const {
  spxnet::validate(topology);
  train.validate();
  augment.validate();
  if (augment.mode != augment_mode_for(topology)) {
    throw ConfigError("augmentation mode " + to_string(augment.mode) + " does not fit " + topology.name);
  }
  if (data.manifest.empty()) {
    if (data.samples < 2) throw ConfigError("data.samples must be at least 2 so both splits are non-empty");
    const int divisor = 1 << topology.levels();
    if (data.height % divisor != 0 || data.width % divisor != 0) {
      throw ConfigError("data.size " + size_str(data.height, data.width) + " is not divisible by " +
                        std::to_string(divisor) + " (" + std::to_string(topology.levels()) + " encoder levels)");
    }
  }
  if (!(data.val_fraction > 0.0 && data.val_fraction < 1.0)) throw ConfigError("data.val_fraction must be in (0, 1)");
  if (output_dir.empty()) throw ConfigError("output_dir is required");
}

std::pair<Dataset, Dataset> experiment_data(const ExperimentConfig& cfg) {
  const DataMode mode = cfg.topology.is_flow() ? DataMode::flow : DataMode::stereo;
  std::pair<Dataset, Dataset> split;
  if (cfg.data.manifest.empty()) {
    split = split_dataset(synthetic_dataset(mode, cfg.data.samples, cfg.data.height, cfg.data.width, cfg.data.seed),
                          cfg.data.seed, cfg.data.val_fraction);
  } else {
    const DatasetManifest manifest = DatasetManifest::load(cfg.data.manifest);
    const auto splits = manifest.splits();
    if (std::find(splits.begin(), splits.end(), "val") != splits.end()) {
      split = {load_dataset(manifest, "train"), load_dataset(manifest, "val")};
    } else {
      split = split_dataset(load_dataset(manifest), cfg.data.seed, cfg.data.val_fraction);
    }
  }
  if (split.first.empty() || split.second.empty()) {
    throw ConfigError("experiment needs non-empty training and validation splits");
  }
  check_compatible(cfg.topology, split.first.mode);
  return split;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const std::string context = "experiment " + cfg.topology.name;
  std::string stage = "config";
  try {
    cfg.validate();
    stage = "output directory";
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.output_dir.string() + ": " + ec.message());

    stage = "data";
    const auto [train_set, val_set] = experiment_data(cfg);

    stage = "training";
    NetworkInstance net = build_network(cfg.topology, cfg.train.seed);
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentResult result;
    result.history = train(net, train_set, val_set, cfg.train, cfg.augment);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    stage = "evaluation";
    result.row.method = cfg.topology.name;
    result.row.params = count_params(net);
    result.row.train_epe = evaluate(net, train_set).mean_epe;
    result.row.val_epe = evaluate(net, val_set).mean_epe;
    result.row.seconds = seconds;
    result.row.seed = cfg.train.seed;
    result.baselines.push_back(baseline_row(kZeroPredictor, zero_predictor(), train_set, val_set, cfg.train.seed));
    result.baselines.push_back(baseline_row(kMeanPredictor, constant_predictor(mean_target(train_set)), train_set,
                                            val_set, cfg.train.seed));

    stage = "writing results";
    const auto& dir = cfg.output_dir;
    save_weights(net, dir / "weights.spxw");
    result.history.save_csv(dir / "history.csv");
    std::vector<ResultRow> rows{result.row};
    rows.insert(rows.end(), result.baselines.begin(), result.baselines.end());
    atomic_write(dir / "results.csv", compare(rows, ReportFormat::csv));
    atomic_write(dir / "results.md", compare(rows, ReportFormat::markdown));
    cfg.to_config().save(dir / "config.conf");

    const PredictionKind kind = cfg.topology.is_flow() ? PredictionKind::flow : PredictionKind::disparity;
    const Tensor pred = net.forward(network_views(cfg.topology, val_set, 0)).full_resolution;
    visualize(pred, kind, dir / "pred_val0");
    visualize(sample_target(val_set, 0), kind, dir / "gt_val0");
    return result;
  } catch (const Error& err) {
    rethrow_with_context(err, context + " (" + stage + ")");
  }
}

}  // namespace spxnet
