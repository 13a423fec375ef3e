#include "spxnet/evaluate.hpp"

#include "spxnet/errors.hpp"
#include "spxnet/loss.hpp"

namespace spxnet {

const Tensor& sample_target(const Dataset& data, std::size_t index) {
  if (index >= data.size()) throw ShapeError("sample index " + std::to_string(index) + " out of range");
  return data.mode == DataMode::flow ? data.flow[index].flow : data.stereo[index].disparity;
}

std::vector<Tensor> network_views(const TopologySpec& spec, const Dataset& data, std::size_t index) {
  if (index >= data.size()) throw ShapeError("sample index " + std::to_string(index) + " out of range");
  if (data.mode == DataMode::flow) return {data.flow[index].frame1, data.flow[index].frame2};
  if (spec.views() == 1) return {data.stereo[index].left};
  return {data.stereo[index].left, data.stereo[index].right};
}

void check_compatible(const TopologySpec& spec, DataMode mode) {
  if (spec.is_flow() != (mode == DataMode::flow)) {
    throw ConfigError(spec.name + " predicts " + (spec.is_flow() ? "flow" : "disparity") + " but the data is " +
                      to_string(mode));
  }
}

EvalResult evaluate(const Predictor& predictor, const Dataset& data) {
  if (data.empty()) throw ConfigError("cannot evaluate on an empty dataset");
  EvalResult r;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = epe(predictor(data, i), sample_target(data, i));
    r.per_sample.push_back(e);
    total += e;
  }
  r.mean_epe = total / static_cast<double>(data.size());
  return r;
}

EvalResult evaluate(const NetworkInstance& net, const Dataset& data, int batch_size) {
  check_compatible(net.topology(), data.mode);
  if (data.empty()) throw ConfigError("cannot evaluate on an empty dataset");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  EvalResult r;
  double total = 0.0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<std::vector<Tensor>> per_view;
    std::vector<Tensor> targets;
    for (std::size_t i = start; i < end; ++i) {
      auto views = network_views(net.topology(), data, i);
      per_view.resize(views.size());
      for (std::size_t v = 0; v < views.size(); ++v) per_view[v].push_back(views[v]);
      targets.push_back(sample_target(data, i));
    }
    std::vector<Tensor> inputs;
    for (const auto& v : per_view) inputs.push_back(stack_batch(v));
    const NetworkOutput out = net.forward(inputs);
    for (double e : epe_per_sample(out.full_resolution, stack_batch(targets))) {
      r.per_sample.push_back(e);
      total += e;
    }
  }
  r.mean_epe = total / static_cast<double>(data.size());
  return r;
}

Predictor zero_predictor() {
  return [](const Dataset& data, std::size_t index) { return Tensor::zeros(sample_target(data, index).shape()); };
}

Predictor constant_predictor(std::vector<float> values) {
  return [values = std::move(values)](const Dataset& data, std::size_t index) {
    const Shape s = sample_target(data, index).shape();
    if (static_cast<std::size_t>(s.c) != values.size()) {
      throw ShapeError("constant predictor has " + std::to_string(values.size()) + " channels, target has " +
                       std::to_string(s.c));
    }
    std::vector<float> out;
    out.reserve(s.numel());
    for (int c = 0; c < s.c; ++c) out.insert(out.end(), s.plane(), values[c]);
    return Tensor::from(s, std::move(out));
  };
}

std::vector<float> mean_target(const Dataset& data) {
  if (data.empty()) throw ConfigError("cannot average an empty dataset");
  const int channels = sample_target(data, 0).shape().c;
  std::vector<double> sums(channels, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Tensor& t = sample_target(data, i);
    const std::size_t plane = t.shape().plane();
    for (int c = 0; c < channels; ++c) {
      for (std::size_t k = 0; k < plane; ++k) sums[c] += t.data()[c * plane + k];
    }
    count += plane;
  }
  std::vector<float> out;
  for (double s : sums) out.push_back(static_cast<float>(s / static_cast<double>(count)));
  return out;
}

}  // namespace spxnet
