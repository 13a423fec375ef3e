#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "helpers.hpp"
#include "spxnet/dataset.hpp"
#include "spxnet/errors.hpp"
#include "spxnet/evaluate.hpp"
#include "spxnet/experiment.hpp"
#include "spxnet/formats.hpp"
#include "spxnet/keyvalue.hpp"
#include "spxnet/loss.hpp"
#include "spxnet/network.hpp"
#include "spxnet/overlap.hpp"
#include "spxnet/report.hpp"
#include "spxnet/visualize.hpp"
#include "spxnet/weights_io.hpp"

using namespace spxnet;
using spxtest::random_tensor;

namespace {

// Brute-force scatter: inputs 0..many each add one to outputs i*s .. i*s+k-1.
std::vector<int> scatter_counts(int k, int s, int length) {
  std::vector<int> counts(length, 0);
  for (int i = 0; i * s < length; ++i) {
    for (int t = 0; t < k; ++t) {
      if (i * s + t < length) ++counts[i * s + t];
    }
  }
  return counts;
}

Predictor oracle_predictor() {
  return [](const Dataset& d, std::size_t i) { return sample_target(d, i).clone(); };
}

}  // namespace

// ---- evaluation ----

TEST(Evaluate, OracleScoresZero) {
  for (DataMode mode : {DataMode::flow, DataMode::stereo}) {
    const Dataset d = synthetic_dataset(mode, 5, 16, 16, 3);
    const EvalResult r = evaluate(oracle_predictor(), d);
    EXPECT_EQ(r.mean_epe, 0.0);
    EXPECT_EQ(r.per_sample.size(), 5u);
  }
}

TEST(Evaluate, ConstantFlowAgainstZeroTruth) {
  Dataset d;
  d.mode = DataMode::flow;
  for (int i = 0; i < 3; ++i) {
    FlowSample s = gen_flow_sample(1, i, 16, 16);
    s.flow = Tensor::zeros({1, 2, 16, 16});
    d.flow.push_back(s);
  }
  EXPECT_DOUBLE_EQ(evaluate(constant_predictor({3.0f, 4.0f}), d).mean_epe, 5.0);
  EXPECT_DOUBLE_EQ(evaluate(zero_predictor(), d).mean_epe, 0.0);
}

TEST(Evaluate, MeanOfPerSampleAndMeanTarget) {
  const Dataset d = synthetic_dataset(DataMode::flow, 6, 16, 16, 4);
  const EvalResult r = evaluate(zero_predictor(), d);
  double sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double direct = epe(Tensor::zeros(d.flow[i].flow.shape()), d.flow[i].flow);
    EXPECT_NEAR(r.per_sample[i], direct, 1e-12);
    sum += direct;
  }
  EXPECT_NEAR(r.mean_epe, sum / 6.0, 1e-12);

  const auto mean = mean_target(d);
  ASSERT_EQ(mean.size(), 2u);
  double u = 0.0;
  for (const auto& s : d.flow)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) u += s.flow.at(0, 0, y, x);
  EXPECT_NEAR(mean[0], u / (6 * 256), 1e-5);
}

TEST(Evaluate, NetworkMatchesPerSampleForward) {
  const NetworkInstance net = build_network(make_topology("despnet", {1, 8}, 5), 2);
  const Dataset d = synthetic_dataset(DataMode::stereo, 5, 32, 32, 5);
  const EvalResult batched = evaluate(net, d, 2);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Tensor pred = net.forward(network_views(net.topology(), d, i)).full_resolution;
    EXPECT_NEAR(batched.per_sample[i], epe(pred, sample_target(d, i)), 1e-5);
  }
  EXPECT_THROW(evaluate(net, synthetic_dataset(DataMode::flow, 1, 32, 32, 1)), ConfigError);
  const NetworkInstance mono = build_network(make_topology("dispnet_mono", {1, 8}, 5), 2);
  EXPECT_EQ(network_views(mono.topology(), d, 0).size(), 1u);
}

// ---- checkerboard overlap ----

TEST(Overlap, KnownPatterns) {
  const OverlapResult a = checkerboard_overlap(3, 2);
  EXPECT_EQ(a.counts, (std::vector<int>{1, 1, 2, 1, 2, 1}));
  EXPECT_EQ(a.interior(), (std::vector<int>{2, 1, 2, 1}));
  EXPECT_FALSE(a.uniform);
  const OverlapResult b = checkerboard_overlap(4, 2);
  EXPECT_EQ(b.interior(), (std::vector<int>{2, 2, 2, 2}));
  EXPECT_TRUE(b.uniform);
  EXPECT_THROW(checkerboard_overlap(0, 1), ConfigError);
  EXPECT_THROW(checkerboard_overlap(3, 0), ConfigError);
  EXPECT_FALSE(a.str().empty());
}

TEST(Overlap, MatchesScatterAndDivisibilityRule) {
  for (int k = 1; k <= 12; ++k) {
    for (int s = 1; s <= k; ++s) {
      const OverlapResult r = checkerboard_overlap(k, s, 40);
      EXPECT_EQ(r.counts, scatter_counts(k, s, 40)) << k << "/" << s;
      EXPECT_EQ(r.uniform, k % s == 0) << k << "/" << s;
      for (int c : r.interior()) {
        EXPECT_TRUE(c == k / s || c == (k + s - 1) / s) << k << "/" << s;
      }
      EXPECT_EQ(checkerboard_overlap(k, s).counts.size(), static_cast<std::size_t>(k - 1 + 2 * s));
    }
  }
}

// ---- reports ----

TEST(Report, CsvRoundTripIsAFixedPoint) {
  std::vector<ResultRow> rows{{"flospnet", 1234567, 1.0 / 3.0, 2.718281828459045, 12.5, 7},
                              {"dispnet, \"wide\"", 42, 0.1, 1e-300, 0.0, 1},
                              {kZeroPredictor, 0, 3.25, 3.5, 0.0, 7}};
  const std::string csv = compare(rows, ReportFormat::csv);
  const auto back = parse_result_csv(csv);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(compare(back, ReportFormat::csv), csv);
  auto sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.method < b.method; });
  EXPECT_EQ(back, sorted);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,params,train_epe,val_epe,seconds,seed");
}

TEST(Report, SingleRowAndMarkdown) {
  const std::vector<ResultRow> one{{"despnet", 2500000, 1.5, 2.25, 3.0, 7}};
  const std::string csv = compare(one, ReportFormat::csv);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  const std::string md = compare({one[0], {kMeanPredictor, 0, 4, 4, 0, 7}}, ReportFormat::markdown);
  EXPECT_NE(md.find("| Method | Params (Mils) | Train EPE | Val EPE | Time (s) | Seed |"), std::string::npos);
  EXPECT_NE(md.find("2.500"), std::string::npos);
  EXPECT_NE(md.find("| - |"), std::string::npos);
  EXPECT_EQ(parse_report_format("md"), ReportFormat::markdown);
  EXPECT_THROW(parse_report_format("xml"), ConfigError);
}

TEST(Report, RowValidation) {
  ResultRow r{"net", 10, 1.0, 1.0, 0.0, 0};
  EXPECT_NO_THROW(r.validate());
  r.params = 0;
  EXPECT_THROW(r.validate(), ConfigError);
  r = {kZeroPredictor, 0, 1.0, 1.0, 0.0, 0};
  EXPECT_NO_THROW(r.validate());
  r.val_epe = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(r.validate(), ConfigError);
  r = {"a\nb", 1, 1, 1, 0, 0};
  EXPECT_THROW(r.validate(), ConfigError);
  EXPECT_THROW(parse_result_csv("method,params\nx,1\n"), FormatError);
  EXPECT_THROW(parse_result_csv("method,params,train_epe,val_epe,seconds,seed\nx,abc,1,1,0,0\n"), FormatError);
  EXPECT_THROW(load_result_csv("/nonexistent.csv"), IoError);
}

// ---- visualization ----

TEST(Visualize, ConstantDisparityIsMidGray) {
  const auto n = normalize_prediction(Tensor::full({1, 1, 3, 4}, 7.0f), PredictionKind::disparity);
  ASSERT_EQ(n.images.size(), 1u);
  for (float v : n.images[0].data()) EXPECT_EQ(v, 0.5f);
  const auto ramp = normalize_prediction(Tensor::from({1, 1, 1, 3}, {2, 4, 6}), PredictionKind::disparity);
  EXPECT_EQ(ramp.images[0].data()[0], 0.0f);
  EXPECT_EQ(ramp.images[0].data()[1], 0.5f);
  EXPECT_EQ(ramp.images[0].data()[2], 1.0f);
}

TEST(Visualize, FlowChannelsShareASymmetricScale) {
  const auto zero = normalize_prediction(Tensor::zeros({1, 2, 2, 2}), PredictionKind::flow);
  ASSERT_EQ(zero.images.size(), 3u);
  for (float v : zero.images[0].data()) EXPECT_EQ(v, 0.5f);
  for (float v : zero.images[1].data()) EXPECT_EQ(v, 0.5f);
  for (float v : zero.images[2].data()) EXPECT_EQ(v, 0.0f);

  const auto f = normalize_prediction(Tensor::from({1, 2, 1, 2}, {3, 0, -4, 0}), PredictionKind::flow);
  EXPECT_FLOAT_EQ(f.images[0].data()[0], 0.5f + 0.5f * 3 / 4);
  EXPECT_FLOAT_EQ(f.images[1].data()[0], 0.0f);
  EXPECT_FLOAT_EQ(f.images[2].data()[0], 1.0f);
  EXPECT_FLOAT_EQ(f.images[2].data()[1], 0.0f);
  EXPECT_THROW(normalize_prediction(Tensor::zeros({1, 3, 2, 2}), PredictionKind::flow), ShapeError);
  EXPECT_THROW(normalize_prediction(Tensor::zeros({2, 1, 2, 2}), PredictionKind::disparity), ShapeError);
}

TEST(Visualize, NonFiniteValuesAreClampedAndCounted) {
  const float inf = std::numeric_limits<float>::infinity();
  const Tensor d = Tensor::from({1, 1, 1, 4}, {std::nanf(""), inf, -inf, 1.0f});
  const auto n = normalize_prediction(d, PredictionKind::disparity);
  EXPECT_EQ(n.non_finite, 3u);
  for (float v : n.images[0].data()) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Visualize, WrittenImagesReadBack) {
  spxtest::TempDir dir("vis");
  Rng rng(6);
  const Tensor flow = random_tensor({1, 2, 8, 6}, rng, -5, 5);
  const auto paths = visualize(flow, PredictionKind::flow, dir.path() / "p");
  ASSERT_EQ(paths.size(), 3u);
  const auto expected = normalize_prediction(flow, PredictionKind::flow);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LE(spxtest::max_abs_diff(read_pgm(paths[i]), expected.images[i]), 0.5 / 255 + 1e-6);
  }
  const auto disp = visualize(random_tensor({1, 1, 4, 4}, rng), PredictionKind::disparity, dir.path() / "d");
  ASSERT_EQ(disp.size(), 1u);
  EXPECT_EQ(disp[0].filename(), "d.pgm");
}

// ---- experiment ----

namespace {

ExperimentConfig tiny_experiment(const std::filesystem::path& out) {
  KeyValueConfig kv = KeyValueConfig::parse(
      "net.name = despnet\n"
      "net.width_mult = 1/8\n"
      "net.encoder_levels = 5\n"
      "data.samples = 6\n"
      "data.size = 32x32\n"
      "data.val_fraction = 0.34\n"
      "train.epochs = 2\n"
      "train.milestones = 1\n"
      "train.batch_size = 4\n"
      "train.lr = 0.001\n"
      "augment.vflip = true\n");
  kv.set("output_dir", out.string());
  return ExperimentConfig::from_config(kv);
}

}  // namespace

TEST(Experiment, ConfigRoundTrip) {
  const ExperimentConfig a = tiny_experiment("/tmp/x");
  EXPECT_EQ(a.topology, make_topology("despnet", {1, 8}, 5));
  EXPECT_EQ(a.augment.mode, AugmentMode::stereo);
  const ExperimentConfig b = ExperimentConfig::from_config(a.to_config());
  EXPECT_EQ(b.to_config().str(), a.to_config().str());
  EXPECT_EQ(b.topology, a.topology);
  EXPECT_EQ(b.train.milestones, a.train.milestones);
  EXPECT_EQ(b.data.height, 32);
}

TEST(Experiment, ValidationCatchesBadSettings) {
  ExperimentConfig c = tiny_experiment("/tmp/x");
  c.data.height = 40;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_experiment("/tmp/x");
  c.output_dir.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_experiment("/tmp/x");
  c.augment.mode = AugmentMode::flow;
  EXPECT_THROW(c.validate(), ConfigError);
  // An unknown name is only valid with the layers spelled out.
  KeyValueConfig kv;
  kv.set("net.name", "nonet");
  kv.set("output_dir", "/tmp/x");
  EXPECT_THROW(ExperimentConfig::from_config(kv).validate(), ConfigError);
}

TEST(Experiment, RunsWritesArtifactsAndRepeats) {
  spxtest::TempDir dir("exp");
  const ExperimentConfig cfg = tiny_experiment(dir.path() / "a");
  const ExperimentResult r1 = run_experiment(cfg);
  EXPECT_EQ(r1.row.method, "despnet");
  EXPECT_EQ(r1.row.params, count_params(cfg.topology));
  ASSERT_EQ(r1.baselines.size(), 2u);
  EXPECT_EQ(r1.history.epochs.size(), 2u);
  for (const char* f : {"weights.spxw", "history.csv", "results.csv", "results.md", "config.conf", "pred_val0.pgm",
                        "gt_val0.pgm"}) {
    EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / f)) << f;
  }
  const auto rows = load_result_csv(cfg.output_dir / "results.csv");
  EXPECT_EQ(rows.size(), 3u);

  ExperimentConfig again = cfg;
  again.output_dir = dir.path() / "b";
  ResultRow r2 = run_experiment(again).row;
  r2.seconds = r1.row.seconds;
  EXPECT_EQ(r2, r1.row);
  std::ifstream a(cfg.output_dir / "weights.spxw", std::ios::binary), b(again.output_dir / "weights.spxw",
                                                                        std::ios::binary);
  const std::string wa((std::istreambuf_iterator<char>(a)), {}), wb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(wa, wb);
}

TEST(Experiment, ErrorsCarryContext) {
  spxtest::TempDir dir("experr");
  ExperimentConfig cfg = tiny_experiment(dir.path() / "a");
  cfg.data.manifest = (dir.path() / "missing.tsv").string();
  try {
    run_experiment(cfg);
    FAIL() << "expected an IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("despnet"), std::string::npos) << e.what();
  }
}
