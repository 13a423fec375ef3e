#include "spxnet/loss.hpp"

#include <cmath>

#include "spxnet/errors.hpp"
#include "spxnet/ops.hpp"
#include "spxnet/tape.hpp"

namespace spxnet {

namespace {

void check_pair(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError("epe: prediction " + pred.shape().str() + " vs ground truth " + gt.shape().str());
  }
  if (pred.shape().c != 1 && pred.shape().c != 2) {
    throw ShapeError("epe: expected 1 or 2 channels, got " + std::to_string(pred.shape().c));
  }
}

// Per-pixel residual norms, laid out (n, h, w).
std::vector<double> residual_norms(const Tensor& pred, const Tensor& gt) {
  const Shape s = pred.shape();
  const std::size_t plane = s.plane();
  const auto p = pred.data();
  const auto g = gt.data();
  std::vector<double> norms(static_cast<std::size_t>(s.n) * plane);
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      double sq = 0.0;
      for (int c = 0; c < s.c; ++c) {
        const std::size_t k = (static_cast<std::size_t>(n) * s.c + c) * plane + i;
        const double d = static_cast<double>(p[k]) - g[k];
        sq += d * d;
      }
      norms[n * plane + i] = std::sqrt(sq);
    }
  }
  return norms;
}

}  // namespace

double epe(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt);
  double total = 0.0;
  for (double v : residual_norms(pred, gt)) total += v;
  return total / static_cast<double>(pred.shape().n * pred.shape().plane());
}

std::vector<double> epe_per_sample(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt);
  const auto norms = residual_norms(pred, gt);
  const std::size_t plane = pred.shape().plane();
  std::vector<double> out(pred.shape().n, 0.0);
  for (std::size_t n = 0; n < out.size(); ++n) {
    for (std::size_t i = 0; i < plane; ++i) out[n] += norms[n * plane + i];
    out[n] /= static_cast<double>(plane);
  }
  return out;
}

Tensor epe_loss(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt);
  const auto norms = residual_norms(pred, gt);
  const double count = static_cast<double>(norms.size());
  double total = 0.0;
  for (double v : norms) total += v;
  Tensor out = Tensor::full({1, 1, 1, 1}, static_cast<float>(total / count));
  out.set_requires_grad(pred.requires_grad());
  if (Tape* tape = Tape::active(); tape && out.requires_grad()) {
    tape->record("epe", {pred, gt}, out, [pred, gt, out, norms, count]() {
      const Shape s = pred.shape();
      const std::size_t plane = s.plane();
      const double g = out.grad()[0] / count;
      const auto p = pred.data();
      const auto t = gt.data();
      auto gp = pred.ensure_grad();
      for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
          for (std::size_t i = 0; i < plane; ++i) {
            const double norm = norms[n * plane + i];
            if (norm == 0.0) continue;
            const std::size_t k = (static_cast<std::size_t>(n) * s.c + c) * plane + i;
            gp[k] += static_cast<float>(g * (static_cast<double>(p[k]) - t[k]) / norm);
          }
        }
      }
    });
  }
  return out;
}

Tensor downsample_gt(const Tensor& gt, int h, int w) {
  const Shape s = gt.shape();
  if (h < 1 || w < 1 || s.h % h != 0 || s.w % w != 0 || s.h / h != s.w / w) {
    throw ShapeError("cannot downsample ground truth " + s.str() + " to " + std::to_string(h) + "x" +
                     std::to_string(w) + " by a uniform integer factor");
  }
  const int f = s.h / h;
  if (f == 1) return gt;
  Tensor out = Tensor::zeros({s.n, s.c, h, w});
  auto dst = out.mutable_data();
  const auto src = gt.data();
  const double norm = 1.0 / (static_cast<double>(f) * f * f);
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int dy = 0; dy < f; ++dy) {
          const float* row = src.data() + (static_cast<std::size_t>(nc) * s.h + y * f + dy) * s.w + x * f;
          for (int dx = 0; dx < f; ++dx) acc += row[dx];
        }
        dst[(static_cast<std::size_t>(nc) * h + y) * w + x] = static_cast<float>(acc * norm);
      }
    }
  }
  return out;
}

std::vector<double> default_scale_weights(std::size_t scales) {
  return std::vector<double>(scales, scales == 0 ? 0.0 : 1.0 / static_cast<double>(scales));
}

Tensor multiscale_epe_loss(std::span<const Tensor> preds, const Tensor& gt, std::span<const double> weights) {
  if (preds.empty()) throw ShapeError("multiscale loss needs at least one prediction");
  if (preds.size() != weights.size()) {
    throw ShapeError("multiscale loss: " + std::to_string(preds.size()) + " predictions but " +
                     std::to_string(weights.size()) + " weights");
  }
  Tensor total;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (!(weights[k] > 0.0)) throw ConfigError("scale weights must be positive");
    const Tensor target = downsample_gt(gt, preds[k].shape().h, preds[k].shape().w);
    Tensor term = ops::scale(epe_loss(preds[k], target), static_cast<float>(weights[k]));
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

}  // namespace spxnet
