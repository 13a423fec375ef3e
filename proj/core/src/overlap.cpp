#include "spxnet/overlap.hpp"

#include <algorithm>
#include <sstream>

#include "spxnet/errors.hpp"

namespace spxnet {

OverlapResult checkerboard_overlap(int kernel, int stride, int length) {
  if (kernel < 1 || stride < 1) {
    throw ConfigError("overlap needs kernel >= 1 and stride >= 1, got k=" + std::to_string(kernel) +
                      " s=" + std::to_string(stride));
  }
  if (length < 0) throw ConfigError("overlap length must be >= 0");
  if (length == 0) length = kernel - 1 + 2 * stride;

  OverlapResult r;
  r.kernel = kernel;
  r.stride = stride;
  r.counts.resize(static_cast<std::size_t>(length));
  r.interior_begin = std::min(kernel - 1, length);
  for (int o = 0; o < length; ++o) {
    // Taps j with j == o (mod s), 0 <= j < k and j <= o.
    const int top = std::min(kernel - 1, o);
    const int phase = o % stride;
    r.counts[static_cast<std::size_t>(o)] = phase > top ? 0 : (top - phase) / stride + 1;
  }
  const auto inner = r.interior();
  r.uniform = std::adjacent_find(inner.begin(), inner.end(), std::not_equal_to<>()) == inner.end();
  return r;
}

std::string OverlapResult::str() const {
  std::ostringstream os;
  os << "kernel " << kernel << " stride " << stride << ": interior counts";
  const auto inner = interior();
  // One period is enough to show the pattern.
  const std::size_t shown = std::min<std::size_t>(inner.size(), static_cast<std::size_t>(stride));
  for (std::size_t i = 0; i < shown; ++i) os << ' ' << inner[i];
  os << (uniform ? " (uniform)" : " (uneven overlap)");
  return os.str();
}

}  // namespace spxnet
