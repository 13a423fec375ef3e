#pragma once

#include <string>

#include "spxnet/rng.hpp"
#include "spxnet/sample.hpp"

namespace spxnet {

enum class AugmentMode { flow, stereo, mono };
std::string to_string(AugmentMode mode);
AugmentMode parse_augment_mode(const std::string& s);

// Random geometric augmentation. Stereo and mono samples only admit crop
// and vertical flip: rotation, translation and horizontal flip are turned
// off for them and noted in the sample's provenance as "<op>-disabled:...".
struct AugmentConfig {
  AugmentMode mode = AugmentMode::flow;
  int crop_h = 0;  // 0 keeps the full height
  int crop_w = 0;
  bool rotate = false;
  bool translate = false;
  bool hflip = false;
  bool vflip = false;
  double max_rotation_deg = 10.0;
  double max_translation = 0.1;  // fraction of the image extent
  double probability = 0.5;      // per enabled transform

  bool is_identity() const;
  // Throws ConfigError on negative sizes or probabilities outside [0, 1].
  void validate() const;
};

// Transforms are applied in the order rotate, translate, hflip, vflip,
// crop. Every call draws the same number of values from `rng`, so samples
// stay aligned across configurations. Throws ShapeError when the crop is
// larger than the image.
//
// Flow bookkeeping: rotating both frames by t about the image center
// rotates the flow vectors by t; shifting frame2 by an integer (tx, ty)
// adds (tx, ty) to the flow; hflip negates u and vflip negates v.
FlowSample augment(const FlowSample& sample, const AugmentConfig& cfg, Rng& rng);
StereoSample augment(const StereoSample& sample, const AugmentConfig& cfg, Rng& rng);

}  // namespace spxnet
