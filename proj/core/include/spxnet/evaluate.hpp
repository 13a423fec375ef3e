#pragma once

#include <functional>
#include <vector>

#include "spxnet/dataset.hpp"
#include "spxnet/network.hpp"

namespace spxnet {

struct EvalResult {
  double mean_epe = 0.0;
  std::vector<double> per_sample;  // mean EPE of each sample
};

// Full-resolution prediction (1, c, h, w) for sample `index` of a dataset.
using Predictor = std::function<Tensor(const Dataset& data, std::size_t index)>;

EvalResult evaluate(const Predictor& predictor, const Dataset& data);
// Throws ConfigError when a flow network meets stereo data or vice versa.
EvalResult evaluate(const NetworkInstance& net, const Dataset& data, int batch_size = 8);

// Ground truth of a sample: flow (1,2,h,w) or disparity (1,1,h,w).
const Tensor& sample_target(const Dataset& data, std::size_t index);
// Images the network consumes: both frames/views, or the left view alone
// for single-view topologies.
std::vector<Tensor> network_views(const TopologySpec& spec, const Dataset& data, std::size_t index);
void check_compatible(const TopologySpec& spec, DataMode mode);

Predictor zero_predictor();
// Per-channel constant prediction.
Predictor constant_predictor(std::vector<float> values);
// Per-channel mean of the ground truth over a dataset.
std::vector<float> mean_target(const Dataset& data);

}  // namespace spxnet
