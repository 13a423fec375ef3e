#pragma once

#include <cstdint>
#include <vector>

#include "spxnet/rng.hpp"
#include "spxnet/sample.hpp"

namespace spxnet {

// Textured rectangle of a synthetic scene. Flow scenes move it by (du, dv)
// between frames; stereo scenes shift it left by `disparity` in the right
// view. Later rectangles are drawn on top.
struct SceneRect {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;
  int du = 0;
  int dv = 0;
  int disparity = 0;
  std::uint64_t texture_seed = 0;
};

struct FlowScene {
  int height = 64;
  int width = 64;
  std::uint64_t background_seed = 0;
  int background_du = 0;
  int background_dv = 0;
  std::vector<SceneRect> rects;
};

struct StereoScene {
  int height = 64;
  int width = 64;
  std::uint64_t background_seed = 0;
  int background_disparity = 0;
  std::vector<SceneRect> rects;  // disparities should grow with draw order
};

struct SyntheticOptions {
  int min_rects = 3;
  int max_rects = 8;
  int max_motion = 8;             // rectangle motion in [-max, max]^2
  int max_background_motion = 2;  // global background motion
  int max_disparity = 16;
  int max_background_disparity = 3;
  // A flow-scene rectangle is kept only if inverse warping still reproduces
  // frame1 exactly on at least this fraction of pixels.
  double min_consistency = 0.9;
};

// Band-limited noise texture (1, channels, h, w). Each channel spans its own
// random sub-range of [lo, hi], half as wide.
Tensor smooth_texture(std::uint64_t seed, int channels, int h, int w, double lo, double hi);

FlowSample render_flow_scene(const FlowScene& scene);
StereoSample render_stereo_scene(const StereoScene& scene);

FlowScene random_flow_scene(Rng& rng, int height, int width, const SyntheticOptions& options = {});
StereoScene random_stereo_scene(Rng& rng, int height, int width, const SyntheticOptions& options = {});

// Fraction of pixels x where x + flow(x) lies inside the image and
// frame2(x + flow(x)) == frame1(x) exactly. Flow must be integral.
double warp_consistency(const FlowSample& sample);

// Sample `index` of the stream `seed`; (seed, index) fully determines it.
FlowSample gen_flow_sample(std::uint64_t seed, std::uint64_t index, int height, int width,
                           const SyntheticOptions& options = {});
StereoSample gen_stereo_sample(std::uint64_t seed, std::uint64_t index, int height, int width,
                               const SyntheticOptions& options = {});

// Samples 0..n-1 of the stream `seed`. Throws ConfigError on sizes below 8.
std::vector<FlowSample> gen_synthetic_flow(int n, int height, int width, std::uint64_t seed,
                                           const SyntheticOptions& options = {});
std::vector<StereoSample> gen_synthetic_stereo(int n, int height, int width, std::uint64_t seed,
                                               const SyntheticOptions& options = {});

}  // namespace spxnet
