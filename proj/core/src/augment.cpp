#include "spxnet/augment.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "spxnet/errors.hpp"

namespace spxnet {

std::string to_string(AugmentMode mode) {
  switch (mode) {
    case AugmentMode::flow: return "flow";
    case AugmentMode::stereo: return "stereo";
    case AugmentMode::mono: return "mono";
  }
  return "?";
}

AugmentMode parse_augment_mode(const std::string& s) {
  if (s == "flow") return AugmentMode::flow;
  if (s == "stereo") return AugmentMode::stereo;
  if (s == "mono") return AugmentMode::mono;
  throw ConfigError("unknown augmentation mode '" + s + "'");
}

bool AugmentConfig::is_identity() const { return crop_h == 0 && crop_w == 0 && !rotate && !translate && !hflip && !vflip; }

void AugmentConfig::validate() const {
  if (crop_h < 0 || crop_w < 0) throw ConfigError("crop size must be non-negative");
  if (!(probability >= 0.0 && probability <= 1.0)) throw ConfigError("augmentation probability must lie in [0, 1]");
  if (!(max_rotation_deg >= 0.0) || !(max_translation >= 0.0)) throw ConfigError("augmentation ranges must be >= 0");
}

namespace {

// Values drawn for one sample, whether or not a transform is enabled.
struct Draws {
  bool rotate, translate, hflip, vflip;
  double angle_deg;
  int tx, ty;
  int crop_y, crop_x;
};

Draws draw(const AugmentConfig& cfg, Rng& rng, int h, int w) {
  Draws d{};
  d.rotate = rng.bernoulli(cfg.probability);
  d.angle_deg = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
  d.translate = rng.bernoulli(cfg.probability);
  const int max_tx = static_cast<int>(std::floor(cfg.max_translation * w));
  const int max_ty = static_cast<int>(std::floor(cfg.max_translation * h));
  d.tx = rng.uniform_int(-max_tx, max_tx);
  d.ty = rng.uniform_int(-max_ty, max_ty);
  d.hflip = rng.bernoulli(cfg.probability);
  d.vflip = rng.bernoulli(cfg.probability);
  const int ch = cfg.crop_h > 0 ? cfg.crop_h : h;
  const int cw = cfg.crop_w > 0 ? cfg.crop_w : w;
  if (ch > h || cw > w) {
    throw ShapeError("crop " + std::to_string(ch) + "x" + std::to_string(cw) + " larger than image " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  d.crop_y = rng.uniform_int(0, h - ch);
  d.crop_x = rng.uniform_int(0, w - cw);
  return d;
}

// All images below are (1, c, h, w).

Tensor flip(const Tensor& t, bool horizontal) {
  const Shape s = t.shape();
  Tensor out = Tensor::zeros(s);
  auto dst = out.mutable_data();
  const auto src = t.data();
  for (int c = 0; c < s.n * s.c; ++c) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        const int sy = horizontal ? y : s.h - 1 - y;
        const int sx = horizontal ? s.w - 1 - x : x;
        dst[(static_cast<std::size_t>(c) * s.h + y) * s.w + x] = src[(static_cast<std::size_t>(c) * s.h + sy) * s.w + sx];
      }
    }
  }
  return out;
}

// out(x, y) = t(x - tx, y - ty), zero outside.
Tensor shift(const Tensor& t, int tx, int ty) {
  const Shape s = t.shape();
  Tensor out = Tensor::zeros(s);
  auto dst = out.mutable_data();
  const auto src = t.data();
  for (int c = 0; c < s.n * s.c; ++c) {
    for (int y = 0; y < s.h; ++y) {
      const int sy = y - ty;
      if (sy < 0 || sy >= s.h) continue;
      for (int x = 0; x < s.w; ++x) {
        const int sx = x - tx;
        if (sx < 0 || sx >= s.w) continue;
        dst[(static_cast<std::size_t>(c) * s.h + y) * s.w + x] = src[(static_cast<std::size_t>(c) * s.h + sy) * s.w + sx];
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& t, int y0, int x0, int h, int w) {
  const Shape s = t.shape();
  if (y0 == 0 && x0 == 0 && h == s.h && w == s.w) return t;
  std::vector<float> values;
  values.reserve(static_cast<std::size_t>(s.n) * s.c * h * w);
  const auto src = t.data();
  for (int c = 0; c < s.n * s.c; ++c) {
    for (int y = 0; y < h; ++y) {
      const float* row = src.data() + (static_cast<std::size_t>(c) * s.h + y0 + y) * s.w + x0;
      values.insert(values.end(), row, row + w);
    }
  }
  return Tensor::from({s.n, s.c, h, w}, std::move(values));
}

// Resamples every channel at p = R^-1 (p' - c) + c with bilinear weights,
// zero outside.
Tensor rotate_image(const Tensor& t, double angle_rad) {
  const Shape s = t.shape();
  Tensor out = Tensor::zeros(s);
  auto dst = out.mutable_data();
  const auto src = t.data();
  const double cx = 0.5 * (s.w - 1);
  const double cy = 0.5 * (s.h - 1);
  const double cs = std::cos(angle_rad);
  const double sn = std::sin(angle_rad);
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double px = cs * dx + sn * dy + cx;
      const double py = -sn * dx + cs * dy + cy;
      const int x0 = static_cast<int>(std::floor(px));
      const int y0 = static_cast<int>(std::floor(py));
      const double fx = px - x0;
      const double fy = py - y0;
      for (int c = 0; c < s.n * s.c; ++c) {
        const float* plane = src.data() + static_cast<std::size_t>(c) * s.plane();
        auto at = [&](int yy, int xx) -> double {
          return (xx < 0 || xx >= s.w || yy < 0 || yy >= s.h) ? 0.0 : plane[static_cast<std::size_t>(yy) * s.w + xx];
        };
        const double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                         fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
        dst[static_cast<std::size_t>(c) * s.plane() + static_cast<std::size_t>(y) * s.w + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

Tensor rotate_flow(const Tensor& flow, double angle_rad) {
  Tensor moved = rotate_image(flow, angle_rad);
  const Shape s = moved.shape();
  auto d = moved.mutable_data();
  const double cs = std::cos(angle_rad);
  const double sn = std::sin(angle_rad);
  for (std::size_t i = 0; i < s.plane(); ++i) {
    const double u = d[i];
    const double v = d[s.plane() + i];
    d[i] = static_cast<float>(cs * u - sn * v);
    d[s.plane() + i] = static_cast<float>(sn * u + cs * v);
  }
  return moved;
}

Tensor negate_channel(Tensor t, int channel) {
  Tensor out = t.clone();
  const std::size_t plane = out.shape().plane();
  auto d = out.mutable_data();
  for (std::size_t i = 0; i < plane; ++i) d[channel * plane + i] = -d[channel * plane + i];
  return out;
}

Tensor add_to_channels(const Tensor& t, float a, float b) {
  Tensor out = t.clone();
  const std::size_t plane = out.shape().plane();
  auto d = out.mutable_data();
  for (std::size_t i = 0; i < plane; ++i) {
    d[i] += a;
    d[plane + i] += b;
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

FlowSample augment(const FlowSample& sample, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  check_sample(sample);
  if (cfg.mode != AugmentMode::flow) throw ConfigError("flow samples need flow-mode augmentation");
  const Shape s = sample.frame1.shape();
  const Draws d = draw(cfg, rng, s.h, s.w);
  FlowSample out = sample;
  if (cfg.rotate && d.rotate) {
    const double rad = d.angle_deg * std::numbers::pi / 180.0;
    out.frame1 = rotate_image(out.frame1, rad);
    out.frame2 = rotate_image(out.frame2, rad);
    out.flow = rotate_flow(out.flow, rad);
    out.provenance.push_back("rotate:" + fmt(d.angle_deg));
  }
  if (cfg.translate && d.translate && (d.tx != 0 || d.ty != 0)) {
    out.frame2 = shift(out.frame2, d.tx, d.ty);
    out.flow = add_to_channels(out.flow, static_cast<float>(d.tx), static_cast<float>(d.ty));
    out.provenance.push_back("translate:" + std::to_string(d.tx) + "," + std::to_string(d.ty));
  }
  if (cfg.hflip && d.hflip) {
    out.frame1 = flip(out.frame1, true);
    out.frame2 = flip(out.frame2, true);
    out.flow = negate_channel(flip(out.flow, true), 0);
    out.provenance.push_back("hflip");
  }
  if (cfg.vflip && d.vflip) {
    out.frame1 = flip(out.frame1, false);
    out.frame2 = flip(out.frame2, false);
    out.flow = negate_channel(flip(out.flow, false), 1);
    out.provenance.push_back("vflip");
  }
  if (cfg.crop_h > 0 || cfg.crop_w > 0) {
    const int ch = cfg.crop_h > 0 ? cfg.crop_h : s.h;
    const int cw = cfg.crop_w > 0 ? cfg.crop_w : s.w;
    out.frame1 = crop(out.frame1, d.crop_y, d.crop_x, ch, cw);
    out.frame2 = crop(out.frame2, d.crop_y, d.crop_x, ch, cw);
    out.flow = crop(out.flow, d.crop_y, d.crop_x, ch, cw);
    out.provenance.push_back("crop:" + std::to_string(d.crop_y) + "," + std::to_string(d.crop_x) + "," +
                             std::to_string(ch) + "x" + std::to_string(cw));
  }
  return out;
}

StereoSample augment(const StereoSample& sample, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  check_sample(sample);
  if (cfg.mode == AugmentMode::flow) throw ConfigError("stereo samples need stereo- or mono-mode augmentation");
  const Shape s = sample.left.shape();
  const Draws d = draw(cfg, rng, s.h, s.w);
  StereoSample out = sample;
  // Rotation and translation would move correspondences off their rows;
  // a horizontal flip would swap the roles of the two views.
  if (cfg.rotate) out.provenance.push_back("rotate-disabled:epipolar");
  if (cfg.translate) out.provenance.push_back("translate-disabled:epipolar");
  if (cfg.hflip) out.provenance.push_back("hflip-disabled:view-order");
  if (cfg.vflip && d.vflip) {
    out.left = flip(out.left, false);
    out.right = flip(out.right, false);
    out.disparity = flip(out.disparity, false);
    out.provenance.push_back("vflip");
  }
  if (cfg.crop_h > 0 || cfg.crop_w > 0) {
    const int ch = cfg.crop_h > 0 ? cfg.crop_h : s.h;
    const int cw = cfg.crop_w > 0 ? cfg.crop_w : s.w;
    out.left = crop(out.left, d.crop_y, d.crop_x, ch, cw);
    out.right = crop(out.right, d.crop_y, d.crop_x, ch, cw);
    out.disparity = crop(out.disparity, d.crop_y, d.crop_x, ch, cw);
    out.provenance.push_back("crop:" + std::to_string(d.crop_y) + "," + std::to_string(d.crop_x) + "," +
                             std::to_string(ch) + "x" + std::to_string(cw));
  }
  return out;
}

}  // namespace spxnet
