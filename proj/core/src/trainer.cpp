#include "spxnet/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "binary_io.hpp"
#include "spxnet/errors.hpp"
#include "spxnet/evaluate.hpp"
#include "spxnet/loss.hpp"
#include "spxnet/tape.hpp"
#include "spxnet/weights_io.hpp"

namespace spxnet {

namespace {

constexpr std::string_view kOptimizerMagic = "OPTS";

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

void check_augment_mode(const NetworkInstance& net, DataMode mode, const AugmentConfig& aug) {
  const bool ok = mode == DataMode::flow ? aug.mode == AugmentMode::flow
                                         : (aug.mode == (net.topology().views() == 1 ? AugmentMode::mono
                                                                                     : AugmentMode::stereo));
  if (!ok) {
    throw ConfigError("augmentation mode " + to_string(aug.mode) + " does not fit " + net.topology().name + " on " +
                      to_string(mode) + " data");
  }
}

// Augmented copy of sample i as a one-sample dataset.
Dataset augmented(const Dataset& data, std::size_t i, const AugmentConfig& aug, Rng& rng) {
  Dataset one;
  one.mode = data.mode;
  if (data.mode == DataMode::flow) {
    one.flow.push_back(augment(data.flow[i], aug, rng));
  } else {
    one.stereo.push_back(augment(data.stereo[i], aug, rng));
  }
  return one;
}

}  // namespace

std::string TrainHistory::csv() const {
  std::string out = "epoch,loss,lr,val_epe\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + fmt(e.loss) + "," + fmt(e.lr) + "," + fmt(e.val_epe) + "\n";
  }
  return out;
}

void TrainHistory::save_csv(const std::filesystem::path& path) const { atomic_write(path, csv()); }

TrainHistory train(NetworkInstance& net, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                   const AugmentConfig& aug, OptimizerState* state, int start_epoch) {
  cfg.validate();
  aug.validate();
  if (train_set.empty()) throw TrainingError("training set is empty");
  check_compatible(net.topology(), train_set.mode);
  if (!val_set.empty()) check_compatible(net.topology(), val_set.mode);
  check_augment_mode(net, train_set.mode, aug);

  const std::vector<Tensor> params = net.parameter_tensors();
  OptimizerState local;
  OptimizerState& opt = state ? *state : local;
  if (opt.m.empty()) opt = OptimizerState::for_parameters(params);

  TrainHistory history;
  const std::size_t n = train_set.size();
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle(cfg.seed, {0x5u, static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<int>(i) - 1))]);
    }

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::vector<std::vector<Tensor>> per_view;
      std::vector<Tensor> targets;
      for (std::size_t k = start; k < end; ++k) {
        Rng rng(cfg.seed, {0xa06u, static_cast<std::uint64_t>(epoch), order[k]});
        const Dataset one = augmented(train_set, order[k], aug, rng);
        auto views = network_views(net.topology(), one, 0);
        per_view.resize(views.size());
        for (std::size_t v = 0; v < views.size(); ++v) per_view[v].push_back(views[v]);
        targets.push_back(sample_target(one, 0));
      }
      std::vector<Tensor> inputs;
      for (const auto& v : per_view) inputs.push_back(stack_batch(v));
      const Tensor target = stack_batch(targets);

      for (const auto& p : params) p.zero_grad();
      Tape tape;
      Tape::Scope scope(tape);
      const NetworkOutput out = net.forward(inputs);
      const std::vector<double> weights =
          cfg.scale_weights.empty() ? default_scale_weights(out.predictions.size()) : cfg.scale_weights;
      const Tensor loss = multiscale_epe_loss(out.predictions, target, weights);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                            std::to_string(start) + " (lr " + fmt(lr) + ")");
      }
      tape.backward(loss);
      adam_step(params, opt, lr, cfg);
      loss_sum += value * static_cast<double>(end - start);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(n);
    rec.lr = lr;
    rec.val_epe = val_set.empty() ? std::numeric_limits<double>::quiet_NaN() : evaluate(net, val_set).mean_epe;
    history.epochs.push_back(rec);

    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      if (cfg.checkpoint_path.empty()) throw ConfigError("checkpoint_every set without checkpoint_path");
      save_checkpoint(net, opt, epoch + 1, cfg.checkpoint_path);
    }
  }
  return history;
}

void save_checkpoint(const NetworkInstance& net, const OptimizerState& state, int next_epoch,
                     const std::filesystem::path& path) {
  const auto& params = net.parameters();
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("optimizer state does not match the network parameters");
  }
  std::vector<NamedTensor> moments;
  for (std::size_t i = 0; i < params.size(); ++i) moments.push_back({"m:" + params[i].name, state.m[i]});
  for (std::size_t i = 0; i < params.size(); ++i) moments.push_back({"v:" + params[i].name, state.v[i]});
  detail::ByteWriter w;
  w.bytes(encode_weights(to_blob(net)));
  w.bytes(kOptimizerMagic);
  w.u64(static_cast<std::uint64_t>(state.step));
  w.u32(static_cast<std::uint32_t>(next_epoch));
  w.bytes(encode_tensors(moments));
  atomic_write(path, w.take());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t offset = 0;
  const WeightsBlob blob = decode_weights(bytes, &offset);
  Checkpoint ck;
  ck.net = network_from_blob(blob, std::nullopt);
  detail::ByteReader r(std::string_view(bytes).substr(offset));
  if (r.remaining() < 4 || r.bytes(4) != kOptimizerMagic) throw FormatError("checkpoint has no optimizer section");
  ck.state.step = static_cast<std::int64_t>(r.u64());
  ck.next_epoch = static_cast<int>(r.u32());
  std::size_t moments_offset = offset + r.position();
  const auto moments = decode_tensors(bytes, moments_offset);
  const auto& params = ck.net.parameters();
  if (moments.size() != 2 * params.size()) throw FormatError("checkpoint optimizer section has the wrong size");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = moments[i];
    const auto& v = moments[params.size() + i];
    if (m.name != "m:" + params[i].name || v.name != "v:" + params[i].name ||
        m.tensor.shape() != params[i].tensor.shape() || v.tensor.shape() != params[i].tensor.shape()) {
      throw FormatError("checkpoint moments do not match parameter " + params[i].name);
    }
    ck.state.m.push_back(m.tensor);
    ck.state.v.push_back(v.tensor);
  }
  return ck;
}

}  // namespace spxnet
