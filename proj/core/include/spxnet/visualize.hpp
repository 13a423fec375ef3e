#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "spxnet/tensor.hpp"

namespace spxnet {

enum class PredictionKind { flow, disparity };

// Normalized images in [0,1], shape (1,1,h,w) each. Non-finite inputs are
// clamped (NaN to 0, infinities to the finite extremes) and counted.
struct NormalizedPrediction {
  std::vector<Tensor> images;  // disparity: {d}; flow: {u, v, magnitude}
  std::size_t non_finite = 0;
};

// Disparity: min-max, a constant map becomes mid-gray. Flow: u and v share
// one symmetric scale so 0 maps to mid-gray; magnitude is divided by its max
// (zero flow is black).
NormalizedPrediction normalize_prediction(const Tensor& pred, PredictionKind kind);

// Writes <stem>.pgm for disparity, <stem>_u.pgm, <stem>_v.pgm and
// <stem>_mag.pgm for flow, and returns the paths. `pred` is one sample
// (n == 1) with 1 or 2 channels. Warns on stderr when values were clamped.
std::vector<std::filesystem::path> visualize(const Tensor& pred, PredictionKind kind, const std::filesystem::path& stem);

}  // namespace spxnet
