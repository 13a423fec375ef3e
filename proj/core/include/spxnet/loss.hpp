#pragma once

#include <span>
#include <vector>

#include "spxnet/tensor.hpp"

namespace spxnet {

// Endpoint error: mean over batch and pixels of the Euclidean norm of the
// per-pixel pred - gt vector (absolute difference for one channel).
double epe(const Tensor& pred, const Tensor& gt);
// One mean EPE per batch item.
std::vector<double> epe_per_sample(const Tensor& pred, const Tensor& gt);

// "epe": differentiable scalar EPE. The subgradient at a zero residual is 0.
Tensor epe_loss(const Tensor& pred, const Tensor& gt);

// Average-pools `gt` down to (h, w) and divides the values by the pooling
// factor, so flow/disparity stay in pixel units of the coarser grid.
Tensor downsample_gt(const Tensor& gt, int h, int w);

// Equal weights summing to 1.
std::vector<double> default_scale_weights(std::size_t scales);

// sum_k weights[k] * EPE(preds[k], downsample_gt(gt, to scale of preds[k])).
Tensor multiscale_epe_loss(std::span<const Tensor> preds, const Tensor& gt, std::span<const double> weights);

}  // namespace spxnet
