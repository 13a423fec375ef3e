#include <gtest/gtest.h>

#include <numeric>

#include "helpers.hpp"
#include "spxnet/errors.hpp"
#include "spxnet/grad_check.hpp"
#include "spxnet/loss.hpp"
#include "spxnet/ops.hpp"
#include "spxnet/tape.hpp"

using namespace spxnet;
using spxtest::max_abs_diff;
using spxtest::random_tensor;

namespace {

ops::ConvParams params(Tensor k, Tensor b, int sh, int sw, int ph, int pw) {
  ops::ConvParams p;
  p.kernel = std::move(k);
  p.bias = std::move(b);
  p.stride_h = sh;
  p.stride_w = sw;
  p.pad_h = ph;
  p.pad_w = pw;
  return p;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += double(a.data()[i]) * b.data()[i];
  return s;
}

// The ops are linear in any single input coordinate (leaky ReLU piecewise
// so), where the central difference is exact for every step size. A wide
// step keeps float32 rounding of the outputs out of the comparison.
GradCheckOptions tight(std::uint64_t seed, double eps = 0.25) {
  GradCheckOptions o;
  o.eps = eps;
  o.tol = 1e-3;
  o.seed = seed;
  return o;
}

}  // namespace

TEST(Conv2d, MatchesDirectLoops) {
  Rng rng(11);
  for (auto [sh, sw, ph, pw, kh, kw] : std::vector<std::array<int, 6>>{
           {1, 1, 1, 1, 3, 3}, {2, 2, 3, 3, 7, 7}, {2, 1, 0, 2, 3, 5}, {1, 2, 1, 0, 4, 2}}) {
    Tensor x = random_tensor({2, 3, 9, 10}, rng);
    Tensor k = random_tensor({4, 3, kh, kw}, rng);
    Tensor b = random_tensor({4, 1, 1, 1}, rng);
    Shape s;
    const auto ref = spxtest::naive_conv2d(x, k, &b, sh, sw, ph, pw, s);
    Tensor y = ops::conv2d(x, params(k, b, sh, sw, ph, pw));
    ASSERT_EQ(y.shape(), s);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-5);
  }
}

TEST(Conv2d, OutputSizes) {
  EXPECT_EQ(ops::conv_output_size(64, 7, 2, 3), 32);
  EXPECT_EQ(ops::conv_output_size(5, 3, 1, 1), 5);
  EXPECT_EQ(ops::conv_transpose_output_size(4, 4, 2, 1), 8);
}

TEST(Conv2d, ShapeErrors) {
  Rng rng(1);
  Tensor x = random_tensor({1, 3, 8, 8}, rng);
  EXPECT_THROW(ops::conv2d(x, params(random_tensor({4, 2, 3, 3}, rng), {}, 1, 1, 1, 1)), ShapeError);
  EXPECT_THROW(ops::conv2d(x, params(random_tensor({4, 3, 9, 9}, rng), {}, 1, 1, 0, 0)), ShapeError);
}

TEST(Conv2dTranspose, MatchesScatterLoops) {
  Rng rng(12);
  for (auto [s, p, k] : std::vector<std::array<int, 3>>{{2, 1, 4}, {2, 0, 3}, {1, 1, 3}, {3, 1, 5}}) {
    Tensor x = random_tensor({2, 3, 5, 6}, rng);
    Tensor w = random_tensor({3, 4, k, k}, rng);
    Shape shape;
    const auto ref = spxtest::naive_conv2d_transpose(x, w, s, s, p, p, shape);
    Tensor y = ops::conv2d_transpose(x, params(w, {}, s, s, p, p));
    ASSERT_EQ(y.shape(), shape);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-5);
  }
}

// <conv(x), y> == <x, conv_transpose(y)> for the same kernel.
TEST(Conv2dTranspose, IsAdjointOfConv2d) {
  Rng rng(13);
  for (int trial = 0; trial < 8; ++trial) {
    const int k = rng.uniform_int(1, 5);
    const int s = rng.uniform_int(1, 3);
    const int p = rng.uniform_int(0, k / 2);
    // (h + 2p - k) divisible by s, so conv2d_transpose maps back onto x's full extent.
    const int h = s * rng.uniform_int(2, 4) + k - 2 * p;
    const int w = s * rng.uniform_int(2, 4) + k - 2 * p;
    Tensor x = random_tensor({2, 3, h, w}, rng);
    ops::ConvParams cp = params(random_tensor({4, 3, k, k}, rng), {}, s, s, p, p);
    Tensor cx = ops::conv2d(x, cp);
    Tensor y = random_tensor(cx.shape(), rng);
    Tensor ty = ops::conv2d_transpose(y, cp);
    ASSERT_EQ(ty.shape(), x.shape());
    const double lhs = dot(cx, y);
    const double rhs = dot(x, ty);
    EXPECT_LE(std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)), 1e-4) << "k=" << k << " s=" << s << " p=" << p;
  }
}

TEST(PixelShuffle, FollowsIndexFormula) {
  Tensor x = Tensor::zeros({1, 8, 2, 3});
  std::iota(x.mutable_data().begin(), x.mutable_data().end(), 0.0f);
  Tensor y = ops::pixel_shuffle(x, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 2, 4, 6}));
  for (int c = 0; c < 2; ++c)
    for (int h = 0; h < 2; ++h)
      for (int w = 0; w < 3; ++w)
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) EXPECT_EQ(y.at(0, c, h * 2 + dy, w * 2 + dx), x.at(0, c * 4 + dy * 2 + dx, h, w));
}

TEST(PixelShuffle, IsAPermutation) {
  for (int r = 1; r <= 4; ++r) {
    Tensor x = Tensor::zeros({2, 3 * r * r, 3, 2});
    std::iota(x.mutable_data().begin(), x.mutable_data().end(), 0.0f);
    Tensor y = ops::pixel_shuffle(x, r);
    std::vector<float> seen(y.data().begin(), y.data().end());
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < seen.size(); ++i) ASSERT_EQ(seen[i], float(i)) << "r=" << r;
  }
  EXPECT_THROW(ops::pixel_shuffle(Tensor::zeros({1, 6, 2, 2}), 2), ShapeError);
}

TEST(Correlation, ZeroDisplacementIsMeanOfSquares) {
  Rng rng(14);
  Tensor x = random_tensor({1, 5, 4, 6}, rng);
  Tensor c = ops::correlation_1d(x, x, 0);
  ASSERT_EQ(c.shape(), (Shape{1, 1, 4, 6}));
  for (int h = 0; h < 4; ++h)
    for (int w = 0; w < 6; ++w) {
      double s = 0.0;
      for (int ch = 0; ch < 5; ++ch) s += double(x.at(0, ch, h, w)) * x.at(0, ch, h, w);
      EXPECT_NEAR(c.at(0, 0, h, w), s / 5.0, 1e-6);
    }
}

TEST(Correlation, PeaksAtTheTrueShift) {
  Rng rng(15);
  Tensor right = random_tensor({1, 8, 3, 20}, rng);
  Tensor left = Tensor::zeros(right.shape());
  const int shift = 4;
  for (int c = 0; c < 8; ++c)
    for (int h = 0; h < 3; ++h)
      for (int w = shift; w < 20; ++w) left.at(0, c, h, w) = right.at(0, c, h, w - shift);
  Tensor corr = ops::correlation_1d(left, right, 6);
  for (int w = 8; w < 20; ++w) {
    int best = 0;
    for (int d = 1; d <= 6; ++d)
      if (corr.at(0, d, 1, w) > corr.at(0, best, 1, w)) best = d;
    EXPECT_EQ(best, shift) << "w=" << w;
  }
}

TEST(LeakyRelu, Values) {
  Tensor x = Tensor::from({1, 1, 1, 3}, {-2.0f, 0.0f, 3.0f});
  Tensor y = ops::leaky_relu(x, 0.1f);
  EXPECT_FLOAT_EQ(y.data()[0], -0.2f);
  EXPECT_FLOAT_EQ(y.data()[1], 0.0f);
  EXPECT_FLOAT_EQ(y.data()[2], 3.0f);
}

TEST(Upsample, NearestAndBilinear) {
  Tensor x = Tensor::from({1, 1, 2, 2}, {0.0f, 1.0f, 2.0f, 3.0f});
  Tensor n = ops::upsample(x, 2, ops::UpsampleMode::nearest);
  EXPECT_EQ(n.at(0, 0, 1, 1), 0.0f);
  EXPECT_EQ(n.at(0, 0, 3, 2), 3.0f);
  Tensor b = ops::upsample(x, 2, ops::UpsampleMode::bilinear);
  // Sample position of output column 1 is (1 + 0.5) / 2 - 0.5 = 0.25.
  EXPECT_FLOAT_EQ(b.at(0, 0, 0, 1), 0.25f);
  EXPECT_FLOAT_EQ(b.at(0, 0, 0, 0), 0.0f);  // clamped edge
  // A constant image stays constant.
  Tensor c = ops::upsample(Tensor::full({1, 2, 3, 3}, 4.5f), 3, ops::UpsampleMode::bilinear);
  for (float v : c.data()) EXPECT_FLOAT_EQ(v, 4.5f);
}

TEST(Concat, StacksChannelsPerBatchItem) {
  Rng rng(16);
  Tensor a = random_tensor({2, 1, 2, 2}, rng);
  Tensor b = random_tensor({2, 3, 2, 2}, rng);
  Tensor c = ops::concat_channels({a, b});
  ASSERT_EQ(c.shape(), (Shape{2, 4, 2, 2}));
  EXPECT_EQ(c.at(1, 0, 1, 1), a.at(1, 0, 1, 1));
  EXPECT_EQ(c.at(1, 3, 0, 1), b.at(1, 2, 0, 1));
  EXPECT_THROW(ops::concat_channels({a, Tensor::zeros({2, 1, 3, 2})}), ShapeError);
}

// Finite-difference checks, five seeded instances per op at tol 1e-3.
class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, Conv2d) {
  Rng rng(100 + GetParam());
  const int s = 1 + GetParam() % 2;
  auto r = grad_check(
      [s](const std::vector<Tensor>& in) { return ops::conv2d(in[0], params(in[1], in[2], s, s, 1, 1)); },
      {random_tensor({2, 3, 6, 5}, rng), random_tensor({4, 3, 3, 3}, rng), random_tensor({4, 1, 1, 1}, rng)},
      tight(GetParam()));
  EXPECT_TRUE(r.passed) << r.max_rel_error << " " << r.worst;
}

TEST_P(OpGradient, Conv2dTranspose) {
  Rng rng(200 + GetParam());
  auto r = grad_check(
      [](const std::vector<Tensor>& in) { return ops::conv2d_transpose(in[0], params(in[1], in[2], 2, 2, 1, 1)); },
      {random_tensor({2, 3, 4, 3}, rng), random_tensor({3, 2, 4, 4}, rng), random_tensor({2, 1, 1, 1}, rng)},
      tight(GetParam()));
  EXPECT_TRUE(r.passed) << r.max_rel_error << " " << r.worst;
}

TEST_P(OpGradient, PixelShuffle) {
  Rng rng(300 + GetParam());
  const int ratio = 2 + GetParam() % 2;
  auto r = grad_check([ratio](const std::vector<Tensor>& in) { return ops::pixel_shuffle(in[0], ratio); },
                      {random_tensor({2, 2 * ratio * ratio, 3, 2}, rng)}, tight(GetParam()));
  EXPECT_TRUE(r.passed) << r.max_rel_error << " " << r.worst;
}

TEST_P(OpGradient, Correlation) {
  Rng rng(400 + GetParam());
  auto r = grad_check([](const std::vector<Tensor>& in) { return ops::correlation_1d(in[0], in[1], 3); },
                      {random_tensor({2, 4, 3, 7}, rng), random_tensor({2, 4, 3, 7}, rng)}, tight(GetParam()));
  EXPECT_TRUE(r.passed) << r.max_rel_error << " " << r.worst;
}

TEST_P(OpGradient, LeakyRelu) {
  Rng rng(500 + GetParam());
  auto r = grad_check([](const std::vector<Tensor>& in) { return ops::leaky_relu(in[0], 0.1f); },
                      {spxtest::random_away_from_zero({2, 3, 4, 4}, rng, 0.2)}, tight(GetParam(), 0.1));
  EXPECT_TRUE(r.passed) << r.max_rel_error << " " << r.worst;
}

TEST_P(OpGradient, Concat) {
  Rng rng(600 + GetParam());
  auto r = grad_check([](const std::vector<Tensor>& in) { return ops::concat_channels({in[0], in[1], in[2]}); },
                      {random_tensor({2, 1, 3, 3}, rng), random_tensor({2, 2, 3, 3}, rng),
                       random_tensor({2, 3, 3, 3}, rng)},
                      tight(GetParam()));
  EXPECT_TRUE(r.passed) << r.max_rel_error << " " << r.worst;
}

TEST_P(OpGradient, Upsample) {
  Rng rng(700 + GetParam());
  const auto mode = GetParam() % 2 ? ops::UpsampleMode::nearest : ops::UpsampleMode::bilinear;
  const int factor = 2 + GetParam() % 3;
  auto r = grad_check([mode, factor](const std::vector<Tensor>& in) { return ops::upsample(in[0], factor, mode); },
                      {random_tensor({2, 2, 3, 4}, rng)}, tight(GetParam()));
  EXPECT_TRUE(r.passed) << r.max_rel_error << " " << r.worst;
}

TEST_P(OpGradient, MultiscaleLoss) {
  Rng rng(800 + GetParam());
  // GT offset from the predictions keeps every residual away from the
  // norm's non-differentiable point at zero. The loss is curved, so the step
  // trades truncation error (eps^2 / |r|^2) against float32 rounding of the
  // scalar; small shapes keep per-coordinate gradients large.
  Tensor gt = random_tensor({1, 2, 4, 4}, rng, 2.0, 3.0);
  const std::vector<double> w{0.2, 0.3, 0.5};
  auto r = grad_check(
      [&](const std::vector<Tensor>& in) { return multiscale_epe_loss(in, gt, w); },
      {random_tensor({1, 2, 1, 1}, rng, -2.0, -1.0), random_tensor({1, 2, 2, 2}, rng, -2.0, -1.0),
       random_tensor({1, 2, 4, 4}, rng, -2.0, -1.0)},
      tight(GetParam(), 0.03));
  EXPECT_TRUE(r.passed) << r.max_rel_error << " " << r.worst;
}

TEST_P(OpGradient, ElementwiseOps) {
  Rng rng(900 + GetParam());
  auto r = grad_check(
      [](const std::vector<Tensor>& in) { return ops::add(ops::mul(in[0], in[1]), ops::scale(in[0], -0.5f)); },
      {random_tensor({1, 2, 3, 3}, rng), random_tensor({1, 2, 3, 3}, rng)}, tight(GetParam()));
  EXPECT_TRUE(r.passed) << r.max_rel_error << " " << r.worst;
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradient, ::testing::Range(0, 5));

TEST(GradCheck, DetectsAWrongGradient) {
  // scale() recorded with a deliberately wrong backward rule.
  auto broken = [](const std::vector<Tensor>& in) {
    Tensor out = Tensor::zeros(in[0].shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out.mutable_data()[i] = 3.0f * in[0].data()[i];
    out.set_requires_grad(true);
    if (Tape* tape = Tape::active()) {
      Tensor x = in[0];
      tape->record("broken", {x}, out, [x, out] {
        auto g = x.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0f * out.grad()[i];
      });
    }
    return out;
  };
  Rng rng(5);
  auto r = grad_check(broken, {random_tensor({1, 1, 2, 2}, rng)});
  EXPECT_FALSE(r.passed);
  EXPECT_NEAR(r.max_rel_error, 1.0 / 3.0, 1e-3);
}

TEST(GradCheck, KinkSkippingFlagsOnlyCoordinatesNearTheKink) {
  // |x| has a kink at 0; a coordinate within eps of it is skipped, the rest pass.
  Tensor x = Tensor::from({1, 1, 1, 3}, {0.0004f, 0.5f, -0.7f});
  auto absval = [](const std::vector<Tensor>& in) {
    return ops::add(ops::leaky_relu(in[0], -1.0f), Tensor::zeros(in[0].shape()));
  };
  GradCheckOptions o = tight(0, 1e-3);
  o.skip_kinks = true;
  auto r = grad_check(absval, {x}, o);
  EXPECT_TRUE(r.passed) << r.worst;
  EXPECT_EQ(r.coords_skipped, 1u);
  EXPECT_EQ(r.coords_checked, 2u);
}
