// spxnet command-line tool. Errors print one line, `error: <kind>: <message>`,
// and exit with status 1 (2 for usage errors).

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spxnet/dataset.hpp"
#include "spxnet/errors.hpp"
#include "spxnet/evaluate.hpp"
#include "spxnet/experiment.hpp"
#include "spxnet/network.hpp"
#include "spxnet/overlap.hpp"
#include "spxnet/report.hpp"
#include "spxnet/topology.hpp"
#include "spxnet/weights_io.hpp"

namespace fs = std::filesystem;
using namespace spxnet;

namespace {

std::pair<int, int> parse_size(const std::string& text) {
  // "64" or "64x48"
  const auto x = text.find('x');
  try {
    std::size_t used = 0;
    if (x == std::string::npos) {
      const int s = std::stoi(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return {s, s};
    }
    const int h = std::stoi(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    const std::string rest = text.substr(x + 1);
    const int w = std::stoi(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
    return {h, w};
  } catch (const std::logic_error&) {
    throw ConfigError("--size must be N or HxW, got '" + text + "'");
  }
}

int gen_data(const std::string& mode_text, int n, const std::string& size, std::uint64_t seed, const fs::path& out,
             double val_fraction) {
  const DataMode mode = parse_data_mode(mode_text);
  const auto [h, w] = parse_size(size);
  const Dataset data = synthetic_dataset(mode, n, h, w, seed);
  const DatasetManifest manifest = write_dataset(data, out, seed, val_fraction);
  std::cout << "wrote " << manifest.records.size() << ' ' << to_string(mode) << " samples (" << h << 'x' << w
            << ") to " << (out / "manifest.tsv").string() << '\n';
  return 0;
}

int train_cmd(const fs::path& config) {
  const ExperimentConfig cfg = ExperimentConfig::load(config);
  const ExperimentResult r = run_experiment(cfg);
  std::vector<ResultRow> rows{r.row};
  rows.insert(rows.end(), r.baselines.begin(), r.baselines.end());
  std::cout << compare(rows, ReportFormat::markdown);
  std::cout << "artifacts in " << cfg.output_dir.string() << '\n';
  return 0;
}

int eval_cmd(const fs::path& weights, const fs::path& manifest_path, const std::string& split) {
  const NetworkInstance net = load_weights(weights);
  const DatasetManifest manifest = DatasetManifest::load(manifest_path);
  const Dataset data = load_dataset(manifest, split);
  const EvalResult r = evaluate(net, data);
  const EvalResult zero = evaluate(zero_predictor(), data);
  std::cout << std::setprecision(6);
  std::cout << "network " << net.topology().name << '\n';
  std::cout << "samples " << data.size() << '\n';
  std::cout << "mean_epe " << r.mean_epe << '\n';
  std::cout << "zero_predictor_epe " << zero.mean_epe << '\n';
  return 0;
}

int count_cmd(const std::string& net, const std::string& width, int levels) {
  const TopologySpec t = make_topology(net, Rational::parse(width), levels);
  const std::size_t n = count_params(t);
  std::cout << t.name << ' ' << n << " (" << std::fixed << std::setprecision(2) << static_cast<double>(n) / 1e6
            << " M)\n";
  return 0;
}

int overlap_cmd(int kernel, int stride, int length) {
  const OverlapResult r = checkerboard_overlap(kernel, stride, length);
  std::cout << r.str() << '\n';
  std::cout << "counts";
  for (int c : r.counts) std::cout << ' ' << c;
  std::cout << "\ninterior from " << r.interior_begin << '\n';
  return 0;
}

int compare_cmd(const std::vector<std::string>& inputs, const std::string& format) {
  const ReportFormat f = parse_report_format(format);
  std::vector<ResultRow> rows;
  for (const auto& in : inputs) {
    auto more = load_result_csv(in);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  if (rows.empty()) throw FormatError("no result rows in the input");
  std::cout << compare(rows, f);
  return 0;
}

int describe_cmd(const std::string& net, const std::string& width, int levels, const std::string& size) {
  const TopologySpec t = make_topology(net, Rational::parse(width), levels);
  const auto [h, w] = parse_size(size);
  std::cout << t.name << ": width " << t.encoder.width_mult.str() << ", " << t.levels() << " encoder levels, "
            << (t.is_flow() ? "flow" : "disparity") << " output, " << count_params(t) << " parameters\n";
  std::cout << format_layer_table(describe(t, h, w));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train and evaluate flow and disparity networks"};
  app.require_subcommand(1);

  std::string mode = "flow";
  int n = 200;
  std::string size = "64";
  std::uint64_t seed = 7;
  std::string out;
  double val_fraction = 0.1;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset with a manifest");
  gen->add_option("--mode", mode, "flow or stereo")->check(CLI::IsMember({"flow", "stereo"}));
  gen->add_option("--n", n, "Number of samples")->check(CLI::PositiveNumber);
  gen->add_option("--size", size, "N or HxW");
  gen->add_option("--seed", seed);
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--val-fraction", val_fraction);

  std::string config;
  auto* trn = app.add_subcommand("train", "Run an experiment from a config file");
  trn->add_option("--config", config)->required()->check(CLI::ExistingFile);

  std::string weights;
  std::string data;
  std::string split;
  auto* ev = app.add_subcommand("eval", "Evaluate saved weights on a dataset manifest");
  ev->add_option("--weights", weights)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "manifest.tsv")->required()->check(CLI::ExistingFile);
  ev->add_option("--split", split, "Only records with this split tag");

  std::string net;
  std::string width = "1";
  int levels = 6;
  auto* cnt = app.add_subcommand("count-params", "Count the parameters of a named network");
  cnt->add_option("--net", net)->required();
  cnt->add_option("--width-mult", width, "q, p/q or an exact decimal");
  cnt->add_option("--levels", levels, "Encoder levels");

  int kernel = 0;
  int stride = 0;
  int length = 0;
  auto* ov = app.add_subcommand("overlap", "Transposed-convolution overlap counts");
  ov->add_option("--kernel", kernel)->required();
  ov->add_option("--stride", stride)->required();
  ov->add_option("--length", length, "Output extent (0: two periods past the border)");

  std::vector<std::string> inputs;
  std::string format = "md";
  auto* cmp = app.add_subcommand("compare", "Merge result CSVs into one table");
  cmp->add_option("--in", inputs)->required()->check(CLI::ExistingFile);
  cmp->add_option("--format", format, "md or csv");

  std::string describe_size = "64";
  auto* desc = app.add_subcommand("describe", "Print the layer table of a named network");
  desc->add_option("--net", net)->required();
  desc->add_option("--width-mult", width);
  desc->add_option("--levels", levels);
  desc->add_option("--size", describe_size, "Input N or HxW");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*gen) return gen_data(mode, n, size, seed, out, val_fraction);
    if (*trn) return train_cmd(config);
    if (*ev) return eval_cmd(weights, data, split);
    if (*cnt) return count_cmd(net, width, levels);
    if (*ov) return overlap_cmd(kernel, stride, length);
    if (*cmp) return compare_cmd(inputs, format);
    if (*desc) return describe_cmd(net, width, levels, describe_size);
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
