#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spxnet/tensor.hpp"

namespace spxnet {

// Optimizer and schedule settings; defaults are the full training recipe.
struct TrainConfig {
  int batch_size = 8;
  double base_lr = 1e-4;
  int epochs = 300;
  std::vector<int> milestones{100, 150, 200};
  double decay = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  // Per-scale loss weights, coarse to fine; empty means equal weights.
  std::vector<double> scale_weights;
  // Checkpoint every N epochs (0 disables) to checkpoint_path.
  int checkpoint_every = 0;
  std::string checkpoint_path;

  // Throws ConfigError on non-positive sizes or non-increasing milestones.
  void validate() const;
};

// base_lr * decay^(number of milestones <= epoch)
double lr_at(int epoch, const TrainConfig& cfg);

struct OptimizerState {
  std::vector<Tensor> m;  // first moments, shaped like the parameters
  std::vector<Tensor> v;  // second moments
  std::int64_t step = 0;

  static OptimizerState for_parameters(std::span<const Tensor> params);
};

// One bias-corrected Adam update of every parameter from its grad buffer
// (a missing buffer counts as a zero gradient). Arithmetic is in double.
void adam_step(std::span<const Tensor> params, OptimizerState& state, double lr, const TrainConfig& cfg);

}  // namespace spxnet
