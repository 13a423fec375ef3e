#include "spxnet/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "spxnet/ops.hpp"
#include "spxnet/rng.hpp"
#include "spxnet/tape.hpp"

namespace spxnet {

namespace {

double project(const Tensor& out, const std::vector<double>& r) {
  double s = 0.0;
  const auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) s += r[i] * static_cast<double>(d[i]);
  return s;
}

}  // namespace

GradCheckReport grad_check(const TensorFn& fn, std::vector<Tensor> inputs, const GradCheckOptions& options) {
  GradCheckReport report;
  Rng rng(options.seed, {0x6772616463686bull});

  for (auto& t : inputs) {
    t = t.detach();
    t.set_requires_grad(true);
  }

  // Analytic pass.
  std::vector<double> projection;
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor out = fn(inputs);
    projection.resize(out.numel());
    if (out.numel() == 1) {
      projection[0] = 1.0;
    } else {
      for (auto& r : projection) r = rng.uniform(-1.0, 1.0);
    }
    std::vector<float> rf(projection.begin(), projection.end());
    Tensor weights = Tensor::from(out.shape(), rf);
    Tensor loss = out.numel() == 1 ? out : ops::sum(ops::mul(out, weights));
    tape.backward(loss);
  }

  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor& t = inputs[ti];
    std::vector<float> analytic(t.numel(), 0.0f);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());

    std::vector<std::size_t> coords(t.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords != 0 && coords.size() > options.max_coords) {
      for (std::size_t i = 0; i < options.max_coords; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(coords.size() - i - 1)));
        std::swap(coords[i], coords[j]);
      }
      coords.resize(options.max_coords);
    }

    for (std::size_t idx : coords) {
      auto data = t.mutable_data();
      const float original = data[idx];
      data[idx] = static_cast<float>(original + options.eps);
      const double up = static_cast<double>(data[idx]);
      const double f_plus = project(fn(inputs), projection);
      data[idx] = static_cast<float>(original - options.eps);
      const double down = static_cast<double>(data[idx]);
      const double f_minus = project(fn(inputs), projection);
      data[idx] = original;

      if (options.skip_kinks) {
        const double f_mid = project(fn(inputs), projection);
        const double right = (f_plus - f_mid) / (up - original);
        const double left = (f_mid - f_minus) / (original - down);
        const double spread = std::abs(right - left) / std::max({std::abs(right), std::abs(left), options.floor});
        if (!(spread <= options.kink_tol)) {
          ++report.coords_skipped;
          continue;
        }
      }

      // Divide by the step actually taken in float32.
      const double numeric = (f_plus - f_minus) / (up - down);
      const double a = analytic[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coords_checked;
      if (report.coords_checked == 1 || !(rel <= report.max_rel_error)) {
        report.max_rel_error = std::isnan(rel) ? INFINITY : std::max(report.max_rel_error, rel);
        std::ostringstream os;
        os << "input " << ti << '[' << idx << "]: analytic " << a << ", numeric " << numeric;
        report.worst = os.str();
      }
    }
  }
  report.passed = report.coords_checked > 0 && report.max_rel_error <= options.tol;
  return report;
}

}  // namespace spxnet
