#include "spxnet/synthetic.hpp"

#include <algorithm>

#include "spxnet/errors.hpp"

namespace spxnet {

namespace {

constexpr int kMinSize = 8;

void check_size(int height, int width) {
  if (height < kMinSize || width < kMinSize) {
    throw ConfigError("synthetic scenes need at least " + std::to_string(kMinSize) + "x" + std::to_string(kMinSize) +
                      " pixels, got " + std::to_string(height) + "x" + std::to_string(width));
  }
}

// Two passes at this radius give texture structure a few pixels wide, wide
// enough to stay matchable at the coarser encoder levels.
constexpr int kTextureBlur = 3;

// Separable box blur of radius r with clamped edges.
void box_blur(std::vector<double>& img, int h, int w, int r) {
  std::vector<double> tmp(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -r; d <= r; ++d) acc += img[y * w + std::clamp(x + d, 0, w - 1)];
      tmp[y * w + x] = acc / (2 * r + 1);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -r; d <= r; ++d) acc += tmp[std::clamp(y + d, 0, h - 1) * w + x];
      img[y * w + x] = acc / (2 * r + 1);
    }
  }
}

// Copies the (th, tw) window of `tex` at (ty, tx) onto `dst` at (dy, dx),
// clipped to dst. Label maps (if any) receive their label where written.
void paste(const Tensor& tex, int ty, int tx, int th, int tw, Tensor& dst, int dy, int dx, std::vector<float>* label_map,
           float label, std::vector<float>* label_map2 = nullptr, float label2 = 0.0f) {
  const Shape ts = tex.shape();
  const Shape ds = dst.shape();
  auto out = dst.mutable_data();
  const auto src = tex.data();
  for (int y = 0; y < th; ++y) {
    const int oy = dy + y;
    if (oy < 0 || oy >= ds.h) continue;
    for (int x = 0; x < tw; ++x) {
      const int ox = dx + x;
      if (ox < 0 || ox >= ds.w) continue;
      for (int c = 0; c < ds.c; ++c) {
        out[(static_cast<std::size_t>(c) * ds.h + oy) * ds.w + ox] =
            src[(static_cast<std::size_t>(c) * ts.h + ty + y) * ts.w + tx + x];
      }
      if (label_map) (*label_map)[static_cast<std::size_t>(oy) * ds.w + ox] = label;
      if (label_map2) (*label_map2)[static_cast<std::size_t>(oy) * ds.w + ox] = label2;
    }
  }
}

Tensor rect_texture(const SceneRect& r) { return smooth_texture(r.texture_seed, 3, r.h, r.w, 0.0, 1.0); }

}  // namespace

Tensor smooth_texture(std::uint64_t seed, int channels, int h, int w, double lo, double hi) {
  Rng rng(seed, {0x7e47u});
  std::vector<float> values;
  values.reserve(static_cast<std::size_t>(channels) * h * w);
  for (int c = 0; c < channels; ++c) {
    std::vector<double> plane(static_cast<std::size_t>(h) * w);
    for (auto& v : plane) v = rng.uniform();
    box_blur(plane, h, w, kTextureBlur);
    box_blur(plane, h, w, kTextureBlur);
    const auto [mn, mx] = std::minmax_element(plane.begin(), plane.end());
    const double span = *mx - *mn;
    // Per-channel sub-range so objects differ in color as well as texture.
    const double a = rng.uniform(lo, lo + 0.5 * (hi - lo));
    const double b = a + 0.5 * (hi - lo);
    for (double v : plane) {
      const double t = span > 0.0 ? (v - *mn) / span : 0.5;
      values.push_back(static_cast<float>(a + (b - a) * t));
    }
  }
  return Tensor::from({1, channels, h, w}, std::move(values));
}

namespace {

FlowSample render_flow(const FlowScene& scene, const Tensor& canvas, std::span<const Tensor> textures) {
  const int h = scene.height;
  const int w = scene.width;
  const int pad_y = std::abs(scene.background_dv);
  const int pad_x = std::abs(scene.background_du);
  FlowSample s;
  s.frame1 = Tensor::zeros({1, 3, h, w});
  s.frame2 = Tensor::zeros({1, 3, h, w});
  std::vector<float> u(static_cast<std::size_t>(h) * w, static_cast<float>(scene.background_du));
  std::vector<float> v(u.size(), static_cast<float>(scene.background_dv));
  // frame1(x) = canvas(x + pad), frame2(x) = canvas(x + pad - motion).
  paste(canvas, pad_y, pad_x, h, w, s.frame1, 0, 0, nullptr, 0.0f);
  paste(canvas, pad_y - scene.background_dv, pad_x - scene.background_du, h, w, s.frame2, 0, 0, nullptr, 0.0f);
  for (std::size_t i = 0; i < scene.rects.size(); ++i) {
    const auto& r = scene.rects[i];
    paste(textures[i], 0, 0, r.h, r.w, s.frame1, r.y, r.x, &u, static_cast<float>(r.du), &v, static_cast<float>(r.dv));
    paste(textures[i], 0, 0, r.h, r.w, s.frame2, r.y + r.dv, r.x + r.du, nullptr, 0.0f);
  }
  std::vector<float> flow = u;
  flow.insert(flow.end(), v.begin(), v.end());
  s.flow = Tensor::from({1, 2, h, w}, std::move(flow));
  return s;
}

Tensor flow_canvas(const FlowScene& scene) {
  const int pad_y = std::abs(scene.background_dv);
  const int pad_x = std::abs(scene.background_du);
  return smooth_texture(scene.background_seed, 3, scene.height + 2 * pad_y, scene.width + 2 * pad_x, 0.0, 1.0);
}

}  // namespace

FlowSample render_flow_scene(const FlowScene& scene) {
  check_size(scene.height, scene.width);
  std::vector<Tensor> textures;
  for (const auto& r : scene.rects) {
    if (r.w < 1 || r.h < 1) throw ConfigError("scene rectangle must have positive size");
    textures.push_back(rect_texture(r));
  }
  return render_flow(scene, flow_canvas(scene), textures);
}

StereoSample render_stereo_scene(const StereoScene& scene) {
  check_size(scene.height, scene.width);
  const int h = scene.height;
  const int w = scene.width;
  const int bd = scene.background_disparity;
  if (bd < 0) throw ConfigError("disparity must be non-negative");
  const Tensor canvas = smooth_texture(scene.background_seed, 3, h, w + bd, 0.0, 1.0);

  StereoSample s;
  s.left = Tensor::zeros({1, 3, h, w});
  s.right = Tensor::zeros({1, 3, h, w});
  std::vector<float> disp(static_cast<std::size_t>(h) * w, static_cast<float>(bd));
  // left(x) = canvas(x), right(x) = canvas(x + bd), so right(x - bd) = left(x).
  paste(canvas, 0, 0, h, w, s.left, 0, 0, nullptr, 0.0f);
  paste(canvas, 0, bd, h, w, s.right, 0, 0, nullptr, 0.0f);
  for (const auto& r : scene.rects) {
    if (r.w < 1 || r.h < 1) throw ConfigError("scene rectangle must have positive size");
    if (r.disparity < 0) throw ConfigError("disparity must be non-negative");
    const Tensor tex = rect_texture(r);
    paste(tex, 0, 0, r.h, r.w, s.left, r.y, r.x, &disp, static_cast<float>(r.disparity));
    paste(tex, 0, 0, r.h, r.w, s.right, r.y, r.x - r.disparity, nullptr, 0.0f);
  }
  s.disparity = Tensor::from({1, 1, h, w}, std::move(disp));
  return s;
}

namespace {

SceneRect random_rect(Rng& rng, int height, int width) {
  SceneRect r;
  r.w = rng.uniform_int(std::max(2, width / 8), std::max(2, width / 2));
  r.h = rng.uniform_int(std::max(2, height / 8), std::max(2, height / 2));
  r.x = rng.uniform_int(0, width - r.w);
  r.y = rng.uniform_int(0, height - r.h);
  r.texture_seed = rng.next();
  return r;
}

}  // namespace

FlowScene random_flow_scene(Rng& rng, int height, int width, const SyntheticOptions& options) {
  check_size(height, width);
  FlowScene scene;
  scene.height = height;
  scene.width = width;
  scene.background_seed = rng.next();
  scene.background_du = rng.uniform_int(-options.max_background_motion, options.max_background_motion);
  scene.background_dv = rng.uniform_int(-options.max_background_motion, options.max_background_motion);
  const int count = rng.uniform_int(options.min_rects, options.max_rects);
  for (int i = 0; i < count; ++i) {
    SceneRect r = random_rect(rng, height, width);
    r.du = rng.uniform_int(-options.max_motion, options.max_motion);
    r.dv = rng.uniform_int(-options.max_motion, options.max_motion);
    scene.rects.push_back(r);
  }
  return scene;
}

StereoScene random_stereo_scene(Rng& rng, int height, int width, const SyntheticOptions& options) {
  check_size(height, width);
  StereoScene scene;
  scene.height = height;
  scene.width = width;
  scene.background_seed = rng.next();
  scene.background_disparity = rng.uniform_int(0, options.max_background_disparity);
  const int count = rng.uniform_int(options.min_rects, options.max_rects);
  std::vector<int> disparities;
  for (int i = 0; i < count; ++i) {
    disparities.push_back(rng.uniform_int(scene.background_disparity, options.max_disparity));
  }
  // Nearer layers (larger disparity) are drawn last.
  std::sort(disparities.begin(), disparities.end());
  for (int d : disparities) {
    SceneRect r = random_rect(rng, height, width);
    r.disparity = d;
    scene.rects.push_back(r);
  }
  return scene;
}

double warp_consistency(const FlowSample& sample) {
  check_sample(sample);
  const Shape s = sample.frame1.shape();
  const auto f1 = sample.frame1.data();
  const auto f2 = sample.frame2.data();
  const auto fl = sample.flow.data();
  const std::size_t plane = s.plane();
  std::size_t exact = 0;
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * s.w + x;
      const int tx = x + static_cast<int>(fl[i]);
      const int ty = y + static_cast<int>(fl[plane + i]);
      if (tx < 0 || tx >= s.w || ty < 0 || ty >= s.h) continue;
      const std::size_t j = static_cast<std::size_t>(ty) * s.w + tx;
      bool same = true;
      for (int c = 0; c < 3; ++c) same = same && f1[c * plane + i] == f2[c * plane + j];
      if (same) ++exact;
    }
  }
  return static_cast<double>(exact) / static_cast<double>(plane);
}

FlowSample gen_flow_sample(std::uint64_t seed, std::uint64_t index, int height, int width,
                           const SyntheticOptions& options) {
  check_size(height, width);
  Rng rng(seed, {0xf10u, index});
  // Rectangles are added one at a time; a draw that would push the scene
  // below the consistency bar is redrawn, then retried without motion.
  constexpr int kAttempts = 32;
  FlowScene scene = random_flow_scene(rng, height, width, options);
  const std::size_t count = scene.rects.size();
  scene.rects.clear();
  Tensor canvas = flow_canvas(scene);
  FlowSample current = render_flow(scene, canvas, {});
  if (warp_consistency(current) < options.min_consistency) {
    scene.background_du = scene.background_dv = 0;
    canvas = flow_canvas(scene);
    current = render_flow(scene, canvas, {});
  }
  std::vector<Tensor> textures;
  for (std::size_t i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < 2 * kAttempts; ++attempt) {
      SceneRect r = random_rect(rng, height, width);
      if (attempt < kAttempts) {
        r.du = rng.uniform_int(-options.max_motion, options.max_motion);
        r.dv = rng.uniform_int(-options.max_motion, options.max_motion);
      }
      scene.rects.push_back(r);
      textures.push_back(rect_texture(r));
      FlowSample trial = render_flow(scene, canvas, textures);
      if (warp_consistency(trial) >= options.min_consistency) {
        current = std::move(trial);
        break;
      }
      scene.rects.pop_back();
      textures.pop_back();
    }
  }
  return current;
}

StereoSample gen_stereo_sample(std::uint64_t seed, std::uint64_t index, int height, int width,
                               const SyntheticOptions& options) {
  Rng rng(seed, {0x57e7u, index});
  return render_stereo_scene(random_stereo_scene(rng, height, width, options));
}

std::vector<FlowSample> gen_synthetic_flow(int n, int height, int width, std::uint64_t seed,
                                           const SyntheticOptions& options) {
  if (n < 0) throw ConfigError("sample count must be non-negative");
  std::vector<FlowSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(gen_flow_sample(seed, i, height, width, options));
  return out;
}

std::vector<StereoSample> gen_synthetic_stereo(int n, int height, int width, std::uint64_t seed,
                                               const SyntheticOptions& options) {
  if (n < 0) throw ConfigError("sample count must be non-negative");
  std::vector<StereoSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(gen_stereo_sample(seed, i, height, width, options));
  return out;
}

}  // namespace spxnet
