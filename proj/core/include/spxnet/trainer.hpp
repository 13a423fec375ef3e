#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spxnet/augment.hpp"
#include "spxnet/dataset.hpp"
#include "spxnet/network.hpp"
#include "spxnet/optimizer.hpp"

namespace spxnet {

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;     // mean training loss over the epoch
  double lr = 0.0;
  double val_epe = 0.0;  // NaN without a validation set
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  // "epoch,loss,lr,val_epe" header plus one line per epoch.
  std::string csv() const;
  void save_csv(const std::filesystem::path& path) const;
};

// Runs epochs * ceil(N / batch) Adam steps on the multi-scale EPE loss.
// Each epoch shuffles with Rng(seed, epoch) and augments sample i with
// Rng(seed, epoch, i), so runs are reproducible bit for bit.
//
// `state`, when given, is used and updated in place (resuming from a
// checkpoint); training then starts at `start_epoch`. Throws
// TrainingError on an empty dataset or a non-finite loss.
TrainHistory train(NetworkInstance& net, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                   const AugmentConfig& aug, OptimizerState* state = nullptr, int start_epoch = 0);

// Weights file followed by an "OPTS" section: u64 step, u32 next epoch and
// the moment tensors ("m:<param>", "v:<param>") in the tensor encoding.
void save_checkpoint(const NetworkInstance& net, const OptimizerState& state, int next_epoch,
                     const std::filesystem::path& path);

struct Checkpoint {
  NetworkInstance net;
  OptimizerState state;
  int next_epoch = 0;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spxnet
