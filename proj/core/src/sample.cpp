#include "spxnet/sample.hpp"

#include <algorithm>

#include "spxnet/errors.hpp"

namespace spxnet {

std::string to_string(DataMode mode) { return mode == DataMode::flow ? "flow" : "stereo"; }

DataMode parse_data_mode(const std::string& s) {
  if (s == "flow") return DataMode::flow;
  if (s == "stereo") return DataMode::stereo;
  throw ConfigError("unknown data mode '" + s + "' (expected flow or stereo)");
}

namespace {

void expect(const Tensor& t, int channels, const Shape& like, const char* what) {
  if (!t.defined()) throw ShapeError(std::string(what) + " is missing");
  const Shape s = t.shape();
  if (s.n != 1 || s.c != channels || s.h != like.h || s.w != like.w) {
    throw ShapeError(std::string(what) + " has shape " + s.str() + ", expected (1," + std::to_string(channels) + "," +
                     std::to_string(like.h) + "," + std::to_string(like.w) + ")");
  }
}

}  // namespace

void check_sample(const FlowSample& s) {
  const Shape ref = s.frame1.defined() ? s.frame1.shape() : Shape{};
  expect(s.frame1, 3, ref, "frame1");
  expect(s.frame2, 3, ref, "frame2");
  expect(s.flow, 2, ref, "flow");
}

void check_sample(const StereoSample& s) {
  const Shape ref = s.left.defined() ? s.left.shape() : Shape{};
  expect(s.left, 3, ref, "left view");
  expect(s.right, 3, ref, "right view");
  expect(s.disparity, 1, ref, "disparity");
}

Tensor stack_batch(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeError("cannot stack an empty batch");
  Shape s = items.front().shape();
  std::vector<float> values;
  values.reserve(s.numel() * items.size());
  int n = 0;
  for (const auto& t : items) {
    const Shape ts = t.shape();
    if (ts.c != s.c || ts.h != s.h || ts.w != s.w) {
      throw ShapeError("stack_batch: " + ts.str() + " does not match " + s.str());
    }
    values.insert(values.end(), t.data().begin(), t.data().end());
    n += ts.n;
  }
  s.n = n;
  return Tensor::from(s, std::move(values));
}

Tensor batch_item(const Tensor& batch, int n) {
  Shape s = batch.shape();
  if (n < 0 || n >= s.n) throw ShapeError("batch index " + std::to_string(n) + " out of range for " + s.str());
  const std::size_t item = static_cast<std::size_t>(s.c) * s.plane();
  const auto d = batch.data().subspan(static_cast<std::size_t>(n) * item, item);
  s.n = 1;
  return Tensor::from(s, std::vector<float>(d.begin(), d.end()));
}

}  // namespace spxnet
