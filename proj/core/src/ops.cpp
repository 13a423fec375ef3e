#include "spxnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spxnet/errors.hpp"
#include "spxnet/tape.hpp"

namespace spxnet::ops {

namespace {

Tensor new_output(Shape shape, std::initializer_list<const Tensor*> inputs) {
  Tensor out = Tensor::zeros(shape);
  bool needs_grad = false;
  for (const Tensor* t : inputs) needs_grad = needs_grad || (t->defined() && t->requires_grad());
  out.set_requires_grad(needs_grad);
  return out;
}

void record(const char* name, std::vector<Tensor> inputs, const Tensor& out, Tape::BackwardFn fn) {
  if (Tape* tape = Tape::active()) {
    tape->record(name, std::move(inputs), out, out.requires_grad() ? std::move(fn) : Tape::BackwardFn{});
  }
}

void accumulate(Tensor t, const std::vector<double>& delta) {
  auto g = t.ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<float>(delta[i]);
}

// Geometry of a convolution from an image (cin, hin, win) to (cout, hout, wout).
struct ConvGeom {
  int cin, cout, kh, kw, sh, sw, ph, pw, hin, win, hout, wout;
  int patch() const { return cin * kh * kw; }
  int pixels() const { return hout * wout; }
  std::size_t in_size() const { return static_cast<std::size_t>(cin) * hin * win; }
  std::size_t out_size() const { return static_cast<std::size_t>(cout) * hout * wout; }
};

// col[(ci*kh + ky)*kw + kx][oy*wout + ox] = x[ci][oy*sh - ph + ky][ox*sw - pw + kx]
void im2col(const float* x, const ConvGeom& g, float* col) {
  const int P = g.pixels();
  for (int ci = 0; ci < g.cin; ++ci) {
    const float* plane = x + static_cast<std::size_t>(ci) * g.hin * g.win;
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        float* row = col + static_cast<std::size_t>((ci * g.kh + ky) * g.kw + kx) * P;
        for (int oy = 0; oy < g.hout; ++oy) {
          const int iy = oy * g.sh - g.ph + ky;
          float* dst = row + static_cast<std::size_t>(oy) * g.wout;
          if (iy < 0 || iy >= g.hin) {
            std::fill(dst, dst + g.wout, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * g.win;
          for (int ox = 0; ox < g.wout; ++ox) {
            const int ix = ox * g.sw - g.pw + kx;
            dst[ox] = (ix >= 0 && ix < g.win) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters col entries back onto the image, accumulating.
void col2im(const double* col, const ConvGeom& g, double* x) {
  const int P = g.pixels();
  for (int ci = 0; ci < g.cin; ++ci) {
    double* plane = x + static_cast<std::size_t>(ci) * g.hin * g.win;
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        const double* row = col + static_cast<std::size_t>((ci * g.kh + ky) * g.kw + kx) * P;
        for (int oy = 0; oy < g.hout; ++oy) {
          const int iy = oy * g.sh - g.ph + ky;
          if (iy < 0 || iy >= g.hin) continue;
          const double* src = row + static_cast<std::size_t>(oy) * g.wout;
          double* dst = plane + static_cast<std::size_t>(iy) * g.win;
          for (int ox = 0; ox < g.wout; ++ox) {
            const int ix = ox * g.sw - g.pw + kx;
            if (ix >= 0 && ix < g.win) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// C[M][N] += A[M][K] * B[K][N], products and sums in double.
void gemm_acc(int M, int N, int K, const float* __restrict A, const float* __restrict B,
              double* __restrict C) {
  for (int i = 0; i < M; ++i) {
    double* __restrict c = C + static_cast<std::size_t>(i) * N;
    for (int k = 0; k < K; ++k) {
      const double a = A[static_cast<std::size_t>(i) * K + k];
      const float* __restrict b = B + static_cast<std::size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += a * static_cast<double>(b[j]);
    }
  }
}

// dst[c][r] = src[r][c] for a rows x cols matrix.
void transpose(const float* src, int rows, int cols, float* dst) {
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      dst[static_cast<std::size_t>(c) * rows + r] = src[static_cast<std::size_t>(r) * cols + c];
    }
  }
}

void check_conv_params(const ConvParams& p) {
  if (!p.kernel.defined()) throw ShapeError("convolution kernel is undefined");
  if (p.stride_h < 1 || p.stride_w < 1) throw ShapeError("convolution stride must be >= 1");
  if (p.pad_h < 0 || p.pad_w < 0) throw ShapeError("convolution padding must be >= 0");
}

void check_bias(const ConvParams& p, int out_ch) {
  if (p.bias.defined() && p.bias.numel() != static_cast<std::size_t>(out_ch)) {
    throw ShapeError("bias has " + std::to_string(p.bias.numel()) + " entries, expected " +
                     std::to_string(out_ch));
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace

int conv_output_size(int in, int kernel, int stride, int pad) {
  const int span = in + 2 * pad - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

int conv_transpose_output_size(int in, int kernel, int stride, int pad) {
  return (in - 1) * stride - 2 * pad + kernel;
}

Tensor conv2d(const Tensor& x, const ConvParams& p) {
  check_conv_params(p);
  const Shape xs = x.shape();
  const Shape ks = p.kernel.shape();
  if (xs.c != ks.c) {
    throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels, kernel expects " +
                     std::to_string(ks.c));
  }
  const ConvGeom g{xs.c, ks.n, ks.h, ks.w, p.stride_h, p.stride_w, p.pad_h, p.pad_w, xs.h, xs.w,
                   conv_output_size(xs.h, ks.h, p.stride_h, p.pad_h),
                   conv_output_size(xs.w, ks.w, p.stride_w, p.pad_w)};
  if (g.hout < 1 || g.wout < 1) {
    throw ShapeError("conv2d: non-positive output size for input " + xs.str() + " and kernel " + ks.str());
  }
  check_bias(p, g.cout);

  Tensor out = new_output({xs.n, g.cout, g.hout, g.wout}, {&x, &p.kernel, &p.bias});
  const int K = g.patch();
  const int P = g.pixels();
  std::vector<float> col(static_cast<std::size_t>(K) * P);
  std::vector<double> acc(g.out_size());
  const float* w = p.kernel.data().data();
  auto y = out.mutable_data();
  for (int n = 0; n < xs.n; ++n) {
    im2col(x.data().data() + n * g.in_size(), g, col.data());
    if (p.bias.defined()) {
      for (int co = 0; co < g.cout; ++co) {
        std::fill_n(acc.begin() + static_cast<std::ptrdiff_t>(co) * P, P, static_cast<double>(p.bias.data()[co]));
      }
    } else {
      std::fill(acc.begin(), acc.end(), 0.0);
    }
    gemm_acc(g.cout, P, K, w, col.data(), acc.data());
    float* dst = y.data() + n * g.out_size();
    for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<float>(acc[i]);
  }

  record("conv2d", {x, p.kernel, p.bias}, out, [x, p, out, g]() mutable {
    const int K = g.patch();
    const int P = g.pixels();
    const int batch = x.shape().n;
    const float* gy = out.grad().data();
    std::vector<float> col(static_cast<std::size_t>(K) * P);
    std::vector<float> colT(col.size());
    std::vector<float> wT;
    std::vector<double> dcol;
    std::vector<double> dx;
    std::vector<double> dw;
    if (x.requires_grad()) {
      wT.resize(static_cast<std::size_t>(K) * g.cout);
      transpose(p.kernel.data().data(), g.cout, K, wT.data());
      dcol.resize(col.size());
      dx.assign(x.numel(), 0.0);
    }
    const bool need_w = p.kernel.requires_grad();
    if (need_w) dw.assign(p.kernel.numel(), 0.0);

    for (int n = 0; n < batch; ++n) {
      const float* gyn = gy + n * g.out_size();
      if (need_w) {
        im2col(x.data().data() + n * g.in_size(), g, col.data());
        transpose(col.data(), K, P, colT.data());
        gemm_acc(g.cout, K, P, gyn, colT.data(), dw.data());
      }
      if (x.requires_grad()) {
        std::fill(dcol.begin(), dcol.end(), 0.0);
        gemm_acc(K, P, g.cout, wT.data(), gyn, dcol.data());
        col2im(dcol.data(), g, dx.data() + n * g.in_size());
      }
    }
    if (x.requires_grad()) accumulate(x, dx);
    if (need_w) accumulate(p.kernel, dw);
    if (p.bias.defined() && p.bias.requires_grad()) {
      std::vector<double> db(g.cout, 0.0);
      for (int n = 0; n < batch; ++n) {
        for (int co = 0; co < g.cout; ++co) {
          const float* src = gy + n * g.out_size() + static_cast<std::size_t>(co) * P;
          double s = 0.0;
          for (int i = 0; i < P; ++i) s += src[i];
          db[co] += s;
        }
      }
      accumulate(p.bias, db);
    }
  });
  return out;
}

Tensor conv2d_transpose(const Tensor& x, const ConvParams& p) {
  check_conv_params(p);
  const Shape xs = x.shape();
  const Shape ks = p.kernel.shape();
  if (xs.c != ks.n) {
    throw ShapeError("conv2d_transpose: input has " + std::to_string(xs.c) +
                     " channels, kernel expects " + std::to_string(ks.n));
  }
  const int hout = conv_transpose_output_size(xs.h, ks.h, p.stride_h, p.pad_h);
  const int wout = conv_transpose_output_size(xs.w, ks.w, p.stride_w, p.pad_w);
  if (hout < 1 || wout < 1) {
    throw ShapeError("conv2d_transpose: non-positive output size for input " + xs.str());
  }
  // Geometry of the forward convolution this op is the adjoint of: the
  // transposed output plays the image and x plays the convolution output.
  const ConvGeom g{ks.c, ks.n, ks.h, ks.w, p.stride_h, p.stride_w, p.pad_h, p.pad_w, hout, wout, xs.h, xs.w};
  check_bias(p, g.cin);

  Tensor out = new_output({xs.n, g.cin, hout, wout}, {&x, &p.kernel, &p.bias});
  const int K = g.patch();   // out_ch * kh * kw
  const int P = g.pixels();  // input pixels
  const int C = g.cout;      // input channels
  std::vector<float> wT(static_cast<std::size_t>(K) * C);
  transpose(p.kernel.data().data(), C, K, wT.data());
  std::vector<double> col(static_cast<std::size_t>(K) * P);
  std::vector<double> img(g.in_size());
  auto y = out.mutable_data();
  for (int n = 0; n < xs.n; ++n) {
    std::fill(col.begin(), col.end(), 0.0);
    gemm_acc(K, P, C, wT.data(), x.data().data() + n * g.out_size(), col.data());
    if (p.bias.defined()) {
      for (int co = 0; co < g.cin; ++co) {
        std::fill_n(img.begin() + static_cast<std::ptrdiff_t>(co) * hout * wout, hout * wout,
                    static_cast<double>(p.bias.data()[co]));
      }
    } else {
      std::fill(img.begin(), img.end(), 0.0);
    }
    col2im(col.data(), g, img.data());
    float* dst = y.data() + n * g.in_size();
    for (std::size_t i = 0; i < img.size(); ++i) dst[i] = static_cast<float>(img[i]);
  }

  record("conv2d_transpose", {x, p.kernel, p.bias}, out, [x, p, out, g]() mutable {
    const int K = g.patch();
    const int P = g.pixels();
    const int C = g.cout;
    const int batch = x.shape().n;
    const float* gy = out.grad().data();
    std::vector<float> gcol(static_cast<std::size_t>(K) * P);
    std::vector<float> gcolT;
    std::vector<double> dx;
    std::vector<double> dw;
    const bool need_w = p.kernel.requires_grad();
    if (x.requires_grad()) dx.assign(x.numel(), 0.0);
    if (need_w) {
      dw.assign(p.kernel.numel(), 0.0);
      gcolT.resize(gcol.size());
    }
    for (int n = 0; n < batch; ++n) {
      im2col(gy + n * g.in_size(), g, gcol.data());
      if (x.requires_grad()) {
        gemm_acc(C, P, K, p.kernel.data().data(), gcol.data(), dx.data() + n * g.out_size());
      }
      if (need_w) {
        transpose(gcol.data(), K, P, gcolT.data());
        gemm_acc(C, K, P, x.data().data() + n * g.out_size(), gcolT.data(), dw.data());
      }
    }
    if (x.requires_grad()) accumulate(x, dx);
    if (need_w) accumulate(p.kernel, dw);
    if (p.bias.defined() && p.bias.requires_grad()) {
      const int plane = g.hin * g.win;
      std::vector<double> db(g.cin, 0.0);
      for (int n = 0; n < batch; ++n) {
        for (int co = 0; co < g.cin; ++co) {
          const float* src = gy + n * g.in_size() + static_cast<std::size_t>(co) * plane;
          double s = 0.0;
          for (int i = 0; i < plane; ++i) s += src[i];
          db[co] += s;
        }
      }
      accumulate(p.bias, db);
    }
  });
  return out;
}

Tensor pixel_shuffle(const Tensor& x, int ratio) {
  if (ratio < 1) throw ShapeError("pixel_shuffle: ratio must be >= 1");
  const Shape s = x.shape();
  const int r2 = ratio * ratio;
  if (s.c % r2 != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(s.c) + " channels not divisible by " +
                     std::to_string(r2));
  }
  const Shape os{s.n, s.c / r2, s.h * ratio, s.w * ratio};
  Tensor out = new_output(os, {&x});

  // Source offset for every destination element; backward is the inverse map.
  auto source_index = [s, os, ratio](std::size_t dst) {
    const int ox = static_cast<int>(dst % os.w);
    const int oy = static_cast<int>((dst / os.w) % os.h);
    const int c = static_cast<int>((dst / os.plane()) % os.c);
    const int n = static_cast<int>(dst / (os.plane() * os.c));
    const int ic = c * ratio * ratio + (oy % ratio) * ratio + (ox % ratio);
    return ((static_cast<std::size_t>(n) * s.c + ic) * s.h + oy / ratio) * s.w + ox / ratio;
  };
  const auto in = x.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[source_index(i)];

  record("pixel_shuffle", {x}, out, [x, out, source_index]() mutable {
    const auto gy = out.grad();
    auto gx = x.ensure_grad();
    for (std::size_t i = 0; i < gy.size(); ++i) gx[source_index(i)] += gy[i];
  });
  return out;
}

Tensor correlation_1d(const Tensor& left, const Tensor& right, int max_disp) {
  check_same_shape(left, right, "correlation_1d");
  if (max_disp < 0) throw ShapeError("correlation_1d: max_disp must be >= 0");
  const Shape s = left.shape();
  const int D = max_disp + 1;
  Tensor out = new_output({s.n, D, s.h, s.w}, {&left, &right});
  const double inv_c = 1.0 / s.c;
  const std::size_t plane = s.plane();
  const float* L = left.data().data();
  const float* R = right.data().data();
  auto y = out.mutable_data();
  std::vector<double> acc(plane);
  for (int n = 0; n < s.n; ++n) {
    for (int d = 0; d < D; ++d) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int c = 0; c < s.c; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (int h = 0; h < s.h; ++h) {
          const float* lrow = L + base + static_cast<std::size_t>(h) * s.w;
          const float* rrow = R + base + static_cast<std::size_t>(h) * s.w;
          double* arow = acc.data() + static_cast<std::size_t>(h) * s.w;
          for (int w = d; w < s.w; ++w) arow[w] += static_cast<double>(lrow[w]) * rrow[w - d];
        }
      }
      float* dst = y.data() + (static_cast<std::size_t>(n) * D + d) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<float>(acc[i] * inv_c);
    }
  }

  record("correlation_1d", {left, right}, out, [left, right, out, D]() mutable {
    const Shape s = left.shape();
    const std::size_t plane = s.plane();
    const double inv_c = 1.0 / s.c;
    const float* gy = out.grad().data();
    const float* L = left.data().data();
    const float* R = right.data().data();
    std::vector<double> dl(left.requires_grad() ? left.numel() : 0, 0.0);
    std::vector<double> dr(right.requires_grad() ? right.numel() : 0, 0.0);
    for (int n = 0; n < s.n; ++n) {
      for (int d = 0; d < D; ++d) {
        const float* g = gy + (static_cast<std::size_t>(n) * D + d) * plane;
        for (int c = 0; c < s.c; ++c) {
          const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
          for (int h = 0; h < s.h; ++h) {
            const std::size_t row = static_cast<std::size_t>(h) * s.w;
            for (int w = d; w < s.w; ++w) {
              const double gv = g[row + w] * inv_c;
              if (!dl.empty()) dl[base + row + w] += gv * R[base + row + w - d];
              if (!dr.empty()) dr[base + row + w - d] += gv * L[base + row + w];
            }
          }
        }
      }
    }
    if (!dl.empty()) accumulate(left, dl);
    if (!dr.empty()) accumulate(right, dr);
  });
  return out;
}

Tensor leaky_relu(const Tensor& x, float slope) {
  Tensor out = new_output(x.shape(), {&x});
  const auto in = x.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[i] >= 0.0f ? in[i] : slope * in[i];
  record("leaky_relu", {x}, out, [x, out, slope]() mutable {
    const auto in = x.data();
    const auto gy = out.grad();
    auto gx = x.ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += in[i] >= 0.0f ? gy[i] : slope * gy[i];
  });
  return out;
}

Tensor concat_channels(std::initializer_list<Tensor> xs) {
  return concat_channels(std::span<const Tensor>(xs.begin(), xs.size()));
}

Tensor concat_channels(std::span<const Tensor> xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape first = xs.front().shape();
  int channels = 0;
  bool needs_grad = false;
  for (const auto& t : xs) {
    const Shape s = t.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + s.str() + " incompatible with " + first.str());
    }
    channels += s.c;
    needs_grad = needs_grad || t.requires_grad();
  }
  Tensor out = Tensor::zeros({first.n, channels, first.h, first.w});
  out.set_requires_grad(needs_grad);
  auto y = out.mutable_data();
  const std::size_t plane = first.plane();
  for (int n = 0; n < first.n; ++n) {
    std::size_t offset = static_cast<std::size_t>(n) * channels * plane;
    for (const auto& t : xs) {
      const std::size_t chunk = static_cast<std::size_t>(t.shape().c) * plane;
      const float* src = t.data().data() + n * chunk;
      std::copy(src, src + chunk, y.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += chunk;
    }
  }
  std::vector<Tensor> inputs(xs.begin(), xs.end());
  record("concat", inputs, out, [inputs, out, channels, plane]() mutable {
    const auto gy = out.grad();
    const int batch = out.shape().n;
    std::size_t channel_offset = 0;
    for (auto& t : inputs) {
      const std::size_t chunk = static_cast<std::size_t>(t.shape().c) * plane;
      if (t.requires_grad()) {
        auto gx = t.ensure_grad();
        for (int n = 0; n < batch; ++n) {
          const float* src = gy.data() + static_cast<std::size_t>(n) * channels * plane + channel_offset;
          float* dst = gx.data() + n * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
      channel_offset += chunk;
    }
  });
  return out;
}

Tensor upsample(const Tensor& x, int factor, UpsampleMode mode) {
  if (factor < 1) throw ShapeError("upsample: factor must be >= 1");
  const Shape s = x.shape();
  const Shape os{s.n, s.c, s.h * factor, s.w * factor};
  Tensor out = new_output(os, {&x});

  // Each output pixel reads up to four taps (index, weight) of its plane.
  struct Tap {
    int i0, i1;
    double w0, w1;
  };
  auto axis_taps = [mode, factor](int in, int outn) {
    std::vector<Tap> taps(outn);
    for (int o = 0; o < outn; ++o) {
      if (mode == UpsampleMode::nearest) {
        taps[o] = {o / factor, o / factor, 1.0, 0.0};
        continue;
      }
      double src = (o + 0.5) / factor - 0.5;
      if (src < 0.0) src = 0.0;
      int i0 = static_cast<int>(std::floor(src));
      if (i0 > in - 1) i0 = in - 1;
      const int i1 = std::min(i0 + 1, in - 1);
      const double frac = src - i0;
      taps[o] = {i0, i1, 1.0 - frac, frac};
    }
    return taps;
  };
  const auto ty = axis_taps(s.h, os.h);
  const auto tx = axis_taps(s.w, os.w);
  const int planes = s.n * s.c;
  const auto in = x.data();
  auto y = out.mutable_data();
  for (int p = 0; p < planes; ++p) {
    const float* src = in.data() + p * s.plane();
    float* dst = y.data() + p * os.plane();
    for (int oy = 0; oy < os.h; ++oy) {
      const Tap& a = ty[oy];
      const float* r0 = src + static_cast<std::size_t>(a.i0) * s.w;
      const float* r1 = src + static_cast<std::size_t>(a.i1) * s.w;
      for (int ox = 0; ox < os.w; ++ox) {
        const Tap& b = tx[ox];
        const double v = a.w0 * (b.w0 * r0[b.i0] + b.w1 * r0[b.i1]) + a.w1 * (b.w0 * r1[b.i0] + b.w1 * r1[b.i1]);
        dst[static_cast<std::size_t>(oy) * os.w + ox] = static_cast<float>(v);
      }
    }
  }

  record("upsample", {x}, out, [x, out, ty, tx, planes]() mutable {
    const Shape s = x.shape();
    const Shape os = out.shape();
    const auto gy = out.grad();
    std::vector<double> dx(x.numel(), 0.0);
    for (int p = 0; p < planes; ++p) {
      const float* g = gy.data() + p * os.plane();
      double* d = dx.data() + p * s.plane();
      for (int oy = 0; oy < os.h; ++oy) {
        const Tap& a = ty[oy];
        for (int ox = 0; ox < os.w; ++ox) {
          const Tap& b = tx[ox];
          const double gv = g[static_cast<std::size_t>(oy) * os.w + ox];
          d[static_cast<std::size_t>(a.i0) * s.w + b.i0] += gv * a.w0 * b.w0;
          d[static_cast<std::size_t>(a.i0) * s.w + b.i1] += gv * a.w0 * b.w1;
          d[static_cast<std::size_t>(a.i1) * s.w + b.i0] += gv * a.w1 * b.w0;
          d[static_cast<std::size_t>(a.i1) * s.w + b.i1] += gv * a.w1 * b.w1;
        }
      }
    }
    accumulate(x, dx);
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = new_output(a.shape(), {&a, &b});
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + b.data()[i];
  record("add", {a, b}, out, [a, b, out]() mutable {
    const auto gy = out.grad();
    for (const Tensor* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      auto gx = t->ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = new_output(a.shape(), {&a, &b});
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * b.data()[i];
  record("mul", {a, b}, out, [a, b, out]() mutable {
    const auto gy = out.grad();
    if (a.requires_grad()) {
      auto ga = a.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * b.data()[i];
    }
    if (b.requires_grad()) {
      auto gb = b.ensure_grad();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * a.data()[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& x, float s) {
  Tensor out = new_output(x.shape(), {&x});
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.data()[i] * s;
  record("scale", {x}, out, [x, out, s]() mutable {
    const auto gy = out.grad();
    auto gx = x.ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * s;
  });
  return out;
}

Tensor sum(const Tensor& x) {
  Tensor out = new_output({1, 1, 1, 1}, {&x});
  double total = 0.0;
  for (float v : x.data()) total += v;
  out.mutable_data()[0] = static_cast<float>(total);
  record("sum", {x}, out, [x, out]() mutable {
    const float g = out.grad()[0];
    auto gx = x.ensure_grad();
    for (auto& v : gx) v += g;
  });
  return out;
}

}  // namespace spxnet::ops
