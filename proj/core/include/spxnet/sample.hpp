#pragma once

#include <span>
#include <string>
#include <vector>

#include "spxnet/tensor.hpp"

namespace spxnet {

enum class DataMode { flow, stereo };
std::string to_string(DataMode mode);
DataMode parse_data_mode(const std::string& s);

// Two frames (1,3,h,w) in [0,1] and ground-truth flow (1,2,h,w) in pixels:
// channel 0 is horizontal u, channel 1 vertical v. frame1(x) matches
// frame2(x + flow(x)).
struct FlowSample {
  Tensor frame1;
  Tensor frame2;
  Tensor flow;
  // Transformations applied by augmentation, in order.
  std::vector<std::string> provenance;
};

// Rectified pair (1,3,h,w) and left-view disparity (1,1,h,w) >= 0 in
// pixels: left(x) matches right(x - d).
struct StereoSample {
  Tensor left;
  Tensor right;
  Tensor disparity;
  std::vector<std::string> provenance;
};

// Throws ShapeError if the tensors disagree in size or channel count.
void check_sample(const FlowSample& s);
void check_sample(const StereoSample& s);

// Concatenates (1,c,h,w) tensors along the batch axis.
Tensor stack_batch(std::span<const Tensor> items);
// Item `n` of a batch as a (1,c,h,w) tensor.
Tensor batch_item(const Tensor& batch, int n);

}  // namespace spxnet
