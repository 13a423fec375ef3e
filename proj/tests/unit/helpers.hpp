#pragma once

// Shared fixtures and independent reference implementations for the tests.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "spxnet/rng.hpp"
#include "spxnet/tensor.hpp"

namespace spxtest {

using spxnet::Rng;
using spxnet::Shape;
using spxnet::Tensor;

inline Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(s.numel());
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor::from(s, std::move(v));
}

// Values bounded away from zero, for checks across the leaky ReLU kink.
inline Tensor random_away_from_zero(Shape s, Rng& rng, double margin) {
  Tensor t = random_tensor(s, rng);
  for (auto& x : t.mutable_data()) {
    if (std::abs(x) < margin) x = x < 0 ? -margin - std::abs(x) : margin + x;
  }
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a.data()[i]) - b.data()[i]));
  return m;
}

// Direct-loop convolution in double: out[n,o,y,x] = b[o] +
// sum k[o,c,i,j] * in[n,c,y*sh-ph+i,x*sw-pw+j].
inline std::vector<double> naive_conv2d(const Tensor& in, const Tensor& k, const Tensor* bias, int sh, int sw, int ph,
                                        int pw, Shape& out_shape) {
  const Shape s = in.shape();
  const Shape ks = k.shape();
  const int oh = (s.h + 2 * ph - ks.h) / sh + 1;
  const int ow = (s.w + 2 * pw - ks.w) / sw + 1;
  out_shape = {s.n, ks.n, oh, ow};
  std::vector<double> out(out_shape.numel(), 0.0);
  for (int n = 0; n < s.n; ++n)
    for (int o = 0; o < ks.n; ++o)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double acc = bias ? bias->data()[o] : 0.0;
          for (int c = 0; c < s.c; ++c)
            for (int i = 0; i < ks.h; ++i)
              for (int j = 0; j < ks.w; ++j) {
                const int iy = y * sh - ph + i;
                const int ix = x * sw - pw + j;
                if (iy < 0 || iy >= s.h || ix < 0 || ix >= s.w) continue;
                acc += double(k.at(o, c, i, j)) * in.at(n, c, iy, ix);
              }
          out[((std::size_t(n) * ks.n + o) * oh + y) * ow + x] = acc;
        }
  return out;
}

// Scatter form of the transposed convolution, kernel read as (in, out, kh, kw).
inline std::vector<double> naive_conv2d_transpose(const Tensor& in, const Tensor& k, int sh, int sw, int ph, int pw,
                                                  Shape& out_shape) {
  const Shape s = in.shape();
  const Shape ks = k.shape();
  const int oh = (s.h - 1) * sh - 2 * ph + ks.h;
  const int ow = (s.w - 1) * sw - 2 * pw + ks.w;
  out_shape = {s.n, ks.c, oh, ow};
  std::vector<double> out(out_shape.numel(), 0.0);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
          for (int o = 0; o < ks.c; ++o)
            for (int i = 0; i < ks.h; ++i)
              for (int j = 0; j < ks.w; ++j) {
                const int oy = y * sh - ph + i;
                const int ox = x * sw - pw + j;
                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                out[((std::size_t(n) * ks.c + o) * oh + oy) * ow + ox] += double(k.at(c, o, i, j)) * in.at(n, c, y, x);
              }
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("spxnet_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace spxtest
