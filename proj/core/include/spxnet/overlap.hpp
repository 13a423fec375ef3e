#pragma once

#include <string>
#include <vector>

namespace spxnet {

// Contribution counts of a 1-D transposed convolution with kernel k and
// stride s: input i writes outputs i*s .. i*s + k - 1. Output o is interior
// when o >= k - 1, i.e. every tap that could reach it has an input behind it.
struct OverlapResult {
  int kernel = 1;
  int stride = 1;
  std::vector<int> counts;  // per output position, borders included
  int interior_begin = 0;
  bool uniform = true;      // all interior counts equal

  std::vector<int> interior() const { return {counts.begin() + interior_begin, counts.end()}; }
  std::string str() const;
};

// `length` is the output extent; 0 picks k - 1 + 2s, two full periods past
// the border. Throws ConfigError for k < 1 or s < 1.
OverlapResult checkerboard_overlap(int kernel, int stride, int length = 0);

}  // namespace spxnet
