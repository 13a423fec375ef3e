#include "spxnet/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "spxnet/errors.hpp"
#include "spxnet/formats.hpp"

namespace spxnet {

namespace {

// Finite copy of one channel plus the number of values replaced.
std::vector<double> finite_channel(const Tensor& pred, int c, std::size_t& replaced) {
  const Shape s = pred.shape();
  const auto src = pred.data().subspan(static_cast<std::size_t>(c) * s.plane(), s.plane());
  double lo = std::numeric_limits<double>::max();
  double hi = std::numeric_limits<double>::lowest();
  for (float v : src) {
    if (std::isfinite(v)) {
      lo = std::min(lo, static_cast<double>(v));
      hi = std::max(hi, static_cast<double>(v));
    }
  }
  if (lo > hi) lo = hi = 0.0;
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    const float v = src[i];
    if (std::isfinite(v)) {
      out[i] = v;
    } else {
      ++replaced;
      out[i] = std::isnan(v) ? 0.0 : (v > 0 ? hi : lo);
    }
  }
  return out;
}

Tensor image(const Shape& s, const std::vector<double>& values) {
  std::vector<float> f(values.begin(), values.end());
  return Tensor::from({1, 1, s.h, s.w}, std::move(f));
}

}  // namespace

NormalizedPrediction normalize_prediction(const Tensor& pred, PredictionKind kind) {
  const Shape s = pred.shape();
  const int want = kind == PredictionKind::flow ? 2 : 1;
  if (s.n != 1 || s.c != want) {
    throw ShapeError("visualize expects one " + std::string(kind == PredictionKind::flow ? "flow" : "disparity") +
                     " map with " + std::to_string(want) + " channel(s), got " + s.str());
  }
  NormalizedPrediction out;
  if (kind == PredictionKind::disparity) {
    auto d = finite_channel(pred, 0, out.non_finite);
    const auto [mn, mx] = std::minmax_element(d.begin(), d.end());
    const double lo = *mn;
    const double span = *mx - *mn;
    for (auto& v : d) v = span > 0.0 ? (v - lo) / span : 0.5;
    out.images.push_back(image(s, d));
    return out;
  }
  auto u = finite_channel(pred, 0, out.non_finite);
  auto v = finite_channel(pred, 1, out.non_finite);
  std::vector<double> mag(u.size());
  double peak = 0.0;
  double peak_mag = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mag[i] = std::hypot(u[i], v[i]);
    peak = std::max({peak, std::abs(u[i]), std::abs(v[i])});
    peak_mag = std::max(peak_mag, mag[i]);
  }
  for (auto* ch : {&u, &v}) {
    for (auto& x : *ch) x = peak > 0.0 ? 0.5 + 0.5 * x / peak : 0.5;
  }
  for (auto& m : mag) m = peak_mag > 0.0 ? m / peak_mag : 0.0;
  out.images = {image(s, u), image(s, v), image(s, mag)};
  return out;
}

std::vector<std::filesystem::path> visualize(const Tensor& pred, PredictionKind kind, const std::filesystem::path& stem) {
  const NormalizedPrediction norm = normalize_prediction(pred, kind);
  if (norm.non_finite > 0) {
    std::cerr << "warning: " << norm.non_finite << " non-finite prediction value(s) clamped in " << stem.string() << '\n';
  }
  std::vector<std::filesystem::path> paths;
  const std::vector<const char*> suffixes =
      kind == PredictionKind::flow ? std::vector<const char*>{"_u", "_v", "_mag"} : std::vector<const char*>{""};
  for (std::size_t i = 0; i < suffixes.size(); ++i) {
    auto path = stem;
    path += std::string(suffixes[i]) + ".pgm";
    write_pgm(norm.images[i], path);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace spxnet
