#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spxnet/tensor.hpp"

namespace spxnet {

struct GradCheckOptions {
  double eps = 1e-3;
  double tol = 1e-3;
  // Denominator floor of the relative error, so coordinates whose true
  // derivative is ~0 are judged on absolute error instead.
  double floor = 1e-2;
  // Coordinates checked per input; 0 checks all of them.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  // Skip coordinates where f has a kink inside [x-eps, x+eps] (leaky ReLU,
  // the norm at a zero residual): there the central difference is not the
  // derivative. Detected from f alone, by one-sided slopes that differ by
  // more than kink_tol relative.
  bool skip_kinks = false;
  double kink_tol = 1e-2;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t coords_skipped = 0;
  bool passed = false;
  std::string worst;  // "input i[j]: analytic a, numeric b"
};

using TensorFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Compares analytic gradients with central differences
// (f(x+eps) - f(x-eps)) / 2eps.
//
// `fn` may return any tensor; the checked scalar is <r, fn(inputs)> for a
// fixed random projection r (r = 1 for a scalar output). The projection is
// formed in double so unaffected outputs cancel exactly in the difference.
// Failures are reported, never thrown.
GradCheckReport grad_check(const TensorFn& fn, std::vector<Tensor> inputs, const GradCheckOptions& options = {});

}  // namespace spxnet
