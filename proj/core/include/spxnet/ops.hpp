#pragma once

#include <span>
#include <vector>

#include "spxnet/tensor.hpp"

// Differentiable operators. Every op records itself on the thread's active
// tape (if any) under the name given in its comment; the output requires a
// gradient when any input does.
namespace spxnet::ops {

// Kernel and bias of a 2-D convolution.
//
// conv2d kernel layout is (out_ch, in_ch, k_h, k_w). conv2d_transpose uses
// the same tensor read as (in_ch, out_ch, k_h, k_w), so one ConvParams is
// the adjoint pair of both ops. The bias is (out_ch, 1, 1, 1) and optional.
struct ConvParams {
  Tensor kernel;
  Tensor bias;
  int stride_h = 1;
  int stride_w = 1;
  int pad_h = 0;
  int pad_w = 0;
};

// floor((in + 2p - k) / s) + 1; may be <= 0 for invalid geometry.
int conv_output_size(int in, int kernel, int stride, int pad);
// (in - 1) * s - 2p + k
int conv_transpose_output_size(int in, int kernel, int stride, int pad);

// "conv2d": zero-padded strided cross-correlation.
Tensor conv2d(const Tensor& x, const ConvParams& p);

// "conv2d_transpose": each input pixel scatters a kernel-weighted copy.
Tensor conv2d_transpose(const Tensor& x, const ConvParams& p);

// "pixel_shuffle": out[n, c, h*r+dy, w*r+dx] = in[n, c*r*r + dy*r + dx, h, w].
Tensor pixel_shuffle(const Tensor& x, int ratio);

// "correlation_1d": out[n, d, h, w] = mean_c left[n,c,h,w] * right[n,c,h,w-d]
// for d = 0..max_disp, zero where w-d falls outside the image.
Tensor correlation_1d(const Tensor& left, const Tensor& right, int max_disp);

// "leaky_relu": max(x, slope*x); the derivative at 0 is 1.
Tensor leaky_relu(const Tensor& x, float slope);

// "concat": stacks along channels in argument order.
Tensor concat_channels(std::span<const Tensor> xs);
Tensor concat_channels(std::initializer_list<Tensor> xs);

enum class UpsampleMode { nearest, bilinear };

// "upsample": spatial resize by an integer factor. Bilinear samples at
// (dst + 0.5) / factor - 0.5 (align-corners false) with edge clamping.
Tensor upsample(const Tensor& x, int factor, UpsampleMode mode);

// "add": elementwise a + b (same shape).
Tensor add(const Tensor& a, const Tensor& b);
// "mul": elementwise a * b (same shape).
Tensor mul(const Tensor& a, const Tensor& b);
// "scale": x * s.
Tensor scale(const Tensor& x, float s);
// "sum": scalar (1,1,1,1) sum of all elements, accumulated in double.
Tensor sum(const Tensor& x);

}  // namespace spxnet::ops
