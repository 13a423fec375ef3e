#include <gtest/gtest.h>

#include <fstream>

#include "helpers.hpp"
#include "spxnet/dataset.hpp"
#include "spxnet/errors.hpp"
#include "spxnet/evaluate.hpp"
#include "spxnet/grad_check.hpp"
#include "spxnet/keyvalue.hpp"
#include "spxnet/loss.hpp"
#include "spxnet/network.hpp"
#include "spxnet/tape.hpp"
#include "spxnet/weights_io.hpp"

using namespace spxnet;
using spxtest::random_tensor;

namespace {

const Rational kDesk{1, 8};

std::vector<Tensor> random_views(const TopologySpec& t, int h, int w, Rng& rng) {
  std::vector<Tensor> views;
  for (int v = 0; v < t.views(); ++v) views.push_back(random_tensor({1, 3, h, w}, rng, 0.0, 1.0));
  return views;
}

}  // namespace

TEST(Topology, NineNamedNetworks) {
  EXPECT_EQ(topology_names().size(), 9u);
  for (const auto& name : topology_names()) {
    EXPECT_TRUE(is_topology_name(name));
    EXPECT_NO_THROW(validate(make_topology(name)));
  }
  EXPECT_THROW(make_topology("nonet"), ConfigError);
}

TEST(Topology, ConfigRoundTrip) {
  for (const auto& name : topology_names()) {
    const TopologySpec t = make_topology(name, kDesk, 5);
    const KeyValueConfig cfg = to_config(t, "net.");
    EXPECT_EQ(topology_from_config(KeyValueConfig::parse(cfg.str()), "net."), t) << name;
  }
}

TEST(Topology, ThreeLineConfigIsEnough) {
  const auto t = topology_from_config(KeyValueConfig::parse("name = despnet\nwidth_mult = 1/4\nencoder_levels = 5\n"));
  EXPECT_EQ(t, make_topology("despnet", {1, 4}, 5));
}

TEST(Topology, RationalParsing) {
  EXPECT_EQ(Rational::parse("1/8"), (Rational{1, 8}));
  EXPECT_EQ(Rational::parse("0.125"), (Rational{1, 8}));
  EXPECT_EQ(Rational::parse("2"), (Rational{2, 1}));
  EXPECT_EQ(Rational::parse("0.1"), (Rational{1, 10}));
  EXPECT_THROW(Rational::parse("-1/2"), ConfigError);
  EXPECT_THROW(Rational::parse("0"), ConfigError);
  EXPECT_THROW(Rational::parse("1/0"), ConfigError);
}

// Parameter counts at full width against the reported millions.
TEST(ParamCount, FullWidthOrdering) {
  auto count = [](const char* n) { return double(count_params(make_topology(n))); };
  EXPECT_GE(1.0 - count("despnet") / count("dispnet"), 0.20);
  EXPECT_GE(1.0 - count("flospnet") / count("flownet"), 0.15);
  EXPECT_LE(count("despnet2"), count("despnet"));
  EXPECT_LT(count("despnet_c"), count("dispnet_c"));
  for (const char* n : {"dispnet", "flownet"}) {
    EXPECT_GE(count(n), 36e6) << n;
    EXPECT_LE(count(n), 48e6) << n;
  }
}

TEST(ParamCount, BuiltNetworkMatchesPlan) {
  for (const auto& name : topology_names()) {
    const TopologySpec t = make_topology(name, kDesk, 5);
    const NetworkInstance net = build_network(t, 1);
    std::size_t plan = 0;
    for (const auto& l : plan_layers(t)) plan += l.param_count();
    EXPECT_EQ(count_params(net), plan) << name;
    EXPECT_EQ(count_params(t), plan) << name;
  }
}

TEST(SubPixel, ParamFormulaAndShapes) {
  Rng rng(2);
  for (auto [in, hid, out, r] : std::vector<std::array<int, 4>>{{8, 4, 2, 2}, {3, 5, 1, 3}, {6, 2, 3, 1}}) {
    SubPixelModuleSpec spec{in, hid, out, r};
    const auto m = SubPixelModule::build(spec, rng);
    const std::size_t formula = 9 * (std::size_t(in) * hid + hid * hid + hid * out * r * r) + 2 * hid + out * r * r;
    EXPECT_EQ(m.param_count(), formula);
    EXPECT_EQ(SubPixelModule::expected_param_count(spec), formula);
    EXPECT_EQ(m.forward(random_tensor({2, in, 3, 4}, rng)).shape(), (Shape{2, out, 3 * r, 4 * r}));
  }
}

TEST(Network, DeskFlospnetShapes) {
  const TopologySpec t = make_topology("flospnet", kDesk, 5);
  const NetworkInstance net = build_network(t, 3);
  Rng rng(4);
  const NetworkOutput out = net.forward(random_views(t, 64, 64, rng));
  ASSERT_EQ(out.predictions.size(), 4u);
  int side = 2;
  for (const auto& p : out.predictions) {
    EXPECT_EQ(p.shape(), (Shape{1, 2, side, side}));
    side *= 2;
  }
  EXPECT_EQ(out.full_resolution.shape(), (Shape{1, 2, 64, 64}));
}

TEST(Network, InputValidation) {
  const TopologySpec t = make_topology("dispnet", kDesk, 5);
  const NetworkInstance net = build_network(t, 3);
  Rng rng(4);
  EXPECT_THROW(net.forward(random_views(t, 48, 64, rng)), ShapeError);  // 48 not divisible by 32
  EXPECT_THROW(net.forward({random_tensor({1, 3, 64, 64}, rng)}), ShapeError);
  const NetworkInstance corr = build_network(make_topology("dispnet_c", kDesk, 5), 3);
  EXPECT_THROW(corr.forward({random_tensor({1, 6, 64, 64}, rng)}), ShapeError);
}

// Op trace: subpixel decoders never transpose-convolve, deconv decoders
// never shuffle, and only the correlation variants correlate.
TEST(Network, OpTraceMatchesDecoderFlavor) {
  for (const auto& name : topology_names()) {
    const TopologySpec t = make_topology(name, kDesk, 5);
    const NetworkInstance net = build_network(t, 5);
    Rng rng(6);
    Tape tape;
    Tape::Scope scope(tape);
    net.forward(random_views(t, 64, 64, rng));
    const bool subpixel = t.decoder.flavor == DecoderFlavor::subpixel;
    EXPECT_EQ(tape.contains("conv2d_transpose"), !subpixel) << name;
    EXPECT_EQ(tape.contains("pixel_shuffle"), subpixel) << name;
    EXPECT_EQ(tape.contains("correlation_1d"), t.encoder.variant == EncoderVariant::siamese_correlation) << name;
  }
}

TEST(Network, InitIsSeededAndSharedByLayerName) {
  const auto a = build_network(make_topology("flownet", kDesk, 5), 9);
  const auto b = build_network(make_topology("flownet", kDesk, 5), 9);
  const auto c = build_network(make_topology("flownet", kDesk, 5), 10);
  const auto d = build_network(make_topology("flospnet", kDesk, 5), 9);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_TRUE(bit_equal(a.parameters()[i].tensor, b.parameters()[i].tensor));
  }
  EXPECT_FALSE(bit_equal(a.parameter("conv1.weight"), c.parameter("conv1.weight")));
  EXPECT_TRUE(bit_equal(a.parameter("conv1.weight"), d.parameter("conv1.weight")));
}

TEST(Network, BatchedForwardEqualsPerSample) {
  const TopologySpec t = make_topology("despnet", kDesk, 5);
  const NetworkInstance net = build_network(t, 2);
  Rng rng(8);
  std::vector<Tensor> left, right;
  for (int i = 0; i < 3; ++i) {
    left.push_back(random_tensor({1, 3, 32, 64}, rng, 0.0, 1.0));
    right.push_back(random_tensor({1, 3, 32, 64}, rng, 0.0, 1.0));
  }
  const Tensor batched = net.forward({stack_batch(left), stack_batch(right)}).full_resolution;
  for (int i = 0; i < 3; ++i) {
    const Tensor one = net.forward({left[i], right[i]}).full_resolution;
    EXPECT_TRUE(bit_equal(one, batch_item(batched, i)));
  }
}

TEST(Network, CloneIsIndependent) {
  const NetworkInstance a = build_network(make_topology("flospnet", kDesk, 5), 1);
  NetworkInstance b = a.clone();
  b.parameter("conv1.bias").mutable_data()[0] += 1.0f;
  EXPECT_NE(a.parameter("conv1.bias").data()[0], b.parameter("conv1.bias").data()[0]);
}

TEST(WeightsIo, RoundTripIsBitExact) {
  spxtest::TempDir dir("weights");
  for (const auto& name : topology_names()) {
    const NetworkInstance net = build_network(make_topology(name, kDesk, 5), 21);
    const auto path = dir.path() / (name + ".spxw");
    save_weights(net, path);
    const NetworkInstance back = load_weights(path);
    EXPECT_EQ(back.topology(), net.topology());
    ASSERT_EQ(back.parameters().size(), net.parameters().size());
    for (std::size_t i = 0; i < net.parameters().size(); ++i) {
      EXPECT_EQ(back.parameters()[i].name, net.parameters()[i].name);
      EXPECT_TRUE(bit_equal(back.parameters()[i].tensor, net.parameters()[i].tensor));
    }
    EXPECT_EQ(read_file(path), encode_weights(to_blob(back)));
    EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  }
}

TEST(WeightsIo, Errors) {
  spxtest::TempDir dir("weights_err");
  const NetworkInstance net = build_network(make_topology("flownet", kDesk, 5), 1);
  const auto path = dir.path() / "w.spxw";
  save_weights(net, path);
  EXPECT_THROW(load_weights(path, make_topology("flownet", {1, 4}, 5)), ShapeError);
  EXPECT_THROW(load_weights(dir.path() / "missing.spxw"), IoError);

  std::string bytes = read_file(path);
  bytes[0] = 'X';
  EXPECT_THROW(decode_weights(bytes), FormatError);
  const std::string good = read_file(path);
  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, good.size() / 2, good.size() - 1}) {
    EXPECT_THROW(network_from_blob(decode_weights(good.substr(0, cut)), std::nullopt), FormatError) << cut;
  }
}

// Gradient of a whole desk network. At leaky slope 1 the network is linear in
// each parameter (correlation aside), so central differences are exact up to
// float rounding and a tight tolerance applies.
TEST(NetworkGradient, LinearisedDeskNetworksMatchFiniteDifferences) {
  for (const char* name : {"flospnet", "despnet_c", "flownet"}) {
    TopologySpec t = make_topology(name, kDesk, 5);
    t.leaky_slope = 1.0f;
    const NetworkInstance net = build_network(t, 3);
    Rng rng(7);
    const auto views = random_views(t, 32, 32, rng);
    const auto params = net.parameters();
    std::vector<Tensor> inputs;
    for (const auto& p : params) inputs.push_back(p.tensor);
    GradCheckOptions o;
    o.eps = 0.5;
    o.tol = 5e-3;
    o.max_coords = 2;
    o.seed = 1;
    auto fn = [&](const std::vector<Tensor>& in) {
      std::vector<NamedTensor> named;
      for (std::size_t i = 0; i < in.size(); ++i) named.push_back({params[i].name, in[i]});
      const NetworkOutput out = make_network(t, named).forward(views);
      // Every prediction, resampled to the finest grid, under one projection.
      std::vector<Tensor> all;
      const int fine = out.predictions.back().shape().h;
      for (const auto& p : out.predictions) {
        all.push_back(p.shape().h == fine ? p : ops::upsample(p, fine / p.shape().h, ops::UpsampleMode::nearest));
      }
      return ops::concat_channels(all);
    };
    const auto r = grad_check(fn, inputs, o);
    EXPECT_TRUE(r.passed) << name << ": " << r.max_rel_error << " " << r.worst;
    EXPECT_GE(r.coords_checked, inputs.size());
  }
}

// The real network at slope 0.1 through the multi-scale loss. Coordinates
// whose +-eps window crosses a kink are skipped; the rest must agree to a
// few percent (dense sub-threshold kinks and float32 loss rounding).
TEST(NetworkGradient, DeskFlospnetLossSpotCheck) {
  const TopologySpec t = make_topology("flospnet", kDesk, 5);
  const NetworkInstance net = build_network(t, 3);
  const Dataset data = synthetic_dataset(DataMode::flow, 1, 32, 32, 5);
  const auto views = network_views(t, data, 0);
  Tensor gt = sample_target(data, 0).clone();
  // Offset keeps residuals away from the norm's cone at zero.
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      gt.at(0, 0, y, x) += 5.0f;
      gt.at(0, 1, y, x) -= 4.0f;
    }
  const auto params = net.parameters();
  std::vector<Tensor> inputs;
  for (const auto& p : params) inputs.push_back(p.tensor);
  GradCheckOptions o;
  o.eps = 1e-3;
  o.tol = 5e-2;
  o.max_coords = 3;
  o.skip_kinks = true;
  o.seed = 2;
  const auto r = grad_check(
      [&](const std::vector<Tensor>& in) {
        std::vector<NamedTensor> named;
        for (std::size_t i = 0; i < in.size(); ++i) named.push_back({params[i].name, in[i]});
        const NetworkOutput out = make_network(t, named).forward(views);
        return multiscale_epe_loss(out.predictions, gt, default_scale_weights(out.predictions.size()));
      },
      inputs, o);
  EXPECT_TRUE(r.passed) << r.max_rel_error << " " << r.worst;
  EXPECT_GE(r.coords_checked, r.coords_skipped);
}
