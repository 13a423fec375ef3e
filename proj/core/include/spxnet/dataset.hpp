#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "spxnet/sample.hpp"
#include "spxnet/synthetic.hpp"

namespace spxnet {

// In-memory samples of one mode; only the vector matching `mode` is used.
struct Dataset {
  DataMode mode = DataMode::flow;
  std::vector<FlowSample> flow;
  std::vector<StereoSample> stereo;

  std::size_t size() const { return mode == DataMode::flow ? flow.size() : stereo.size(); }
  bool empty() const { return size() == 0; }
  Dataset subset(const std::vector<std::size_t>& indices) const;
  // (height, width) of the samples; throws ShapeError when they differ.
  std::pair<int, int> image_size() const;
};

Dataset synthetic_dataset(DataMode mode, int n, int height, int width, std::uint64_t seed,
                          const SyntheticOptions& options = {});

// The validation part of n samples: the round(n * fraction) indices with
// the smallest hash of (seed, index), returned in ascending order.
std::vector<std::size_t> validation_indices(std::size_t n, std::uint64_t seed, double fraction = 0.1);
// {train, validation}
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, std::uint64_t seed, double fraction = 0.1);

// One manifest line: `mode<TAB>source<TAB>split`. A source is either
// `synthetic:<seed>:<index>:<h>x<w>` or a file stem relative to the
// manifest, expanded to <stem>_img1.ppm, <stem>_img2.ppm, <stem>_flow.flo
// (flow) or <stem>_left.ppm, <stem>_right.ppm, <stem>_disp.pfm (stereo).
struct ManifestRecord {
  DataMode mode = DataMode::flow;
  std::string source;
  std::string split = "train";
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;  // file stems resolve against this

  // Throws FormatError on malformed lines or mixed modes.
  static DatasetManifest parse(std::istream& is, const std::filesystem::path& base_dir = {});
  static DatasetManifest load(const std::filesystem::path& path);
  std::string str() const;
  void save(const std::filesystem::path& path) const;

  DataMode mode() const;
  std::vector<std::string> splits() const;
};

// Loads the records tagged `split` (all records when empty). All samples
// must share mode and size.
Dataset load_dataset(const DatasetManifest& manifest, const std::string& split = "");

// Writes every sample as files under `dir` plus `dir/manifest.tsv`, tagging
// validation_indices(seed) as "val". Returns the manifest.
DatasetManifest write_dataset(const Dataset& data, const std::filesystem::path& dir, std::uint64_t seed,
                              double val_fraction = 0.1);

}  // namespace spxnet
