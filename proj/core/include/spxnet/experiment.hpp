#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spxnet/augment.hpp"
#include "spxnet/dataset.hpp"
#include "spxnet/keyvalue.hpp"
#include "spxnet/optimizer.hpp"
#include "spxnet/report.hpp"
#include "spxnet/topology.hpp"
#include "spxnet/trainer.hpp"

namespace spxnet {

// Synthetic data (the default) or a manifest file. Synthetic data is split
// by validation_indices; a manifest uses its "train"/"val" tags, falling
// back to the hash split when it has no "val" records.
struct DataSource {
  std::string manifest;  // empty selects synthetic data
  int samples = 200;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 7;
  double val_fraction = 0.1;
};

// Config keys (key = value):
//   net.*       topology (net.name, net.width_mult, net.encoder_levels, overrides)
//   data.*      manifest | samples, size (HxW), seed, val_fraction
//   train.*     batch_size, lr, epochs, milestones, decay, beta1, beta2,
//               eps, seed, scale_weights, checkpoint_every
//   augment.*   crop (HxW), rotate, translate, hflip, vflip,
//               max_rotation_deg, max_translation, probability
//   output_dir
// The augmentation mode follows from the network and data.
struct ExperimentConfig {
  TopologySpec topology;
  DataSource data;
  TrainConfig train;
  AugmentConfig augment;
  std::filesystem::path output_dir;

  static ExperimentConfig from_config(const KeyValueConfig& cfg);
  static ExperimentConfig load(const std::filesystem::path& path);
  KeyValueConfig to_config() const;
  // Throws ConfigError when any part is inconsistent.
  void validate() const;
};

struct ExperimentResult {
  ResultRow row;
  std::vector<ResultRow> baselines;  // zero and mean predictor
  TrainHistory history;
};

// Trains and evaluates, then writes under output_dir:
//   weights.spxw, history.csv, results.csv, results.md, config.conf,
//   and PGM renderings of the first validation sample (pred_*, gt_*).
// Sub-module errors are rethrown with the topology name and stage attached.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Training/validation split for `cfg`, as run_experiment uses it.
std::pair<Dataset, Dataset> experiment_data(const ExperimentConfig& cfg);

}  // namespace spxnet
