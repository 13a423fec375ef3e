#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace spxnet {

// Seedable generator with platform-independent draws. Distributions are
// computed from raw mt19937_64 output rather than <random> distributions,
// whose algorithms differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}
  // Independent stream for (seed, keys...), e.g. (seed, epoch, sample).
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t hash_name(std::string_view name);

}  // namespace spxnet
