#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "stainbench/error.hpp"

namespace stainbench {

// Linear-interpolation percentile: rank = (n - 1) * p / 100 on the sorted
// values, interpolated between the two neighbouring order statistics.
// Reorders `values`.
inline double percentile_inplace(std::span<double> values, double p) {
  if (values.empty()) {
    throw Error(ErrorKind::EmptyInput, "percentile of an empty collection");
  }
  if (!(p >= 0.0 && p <= 100.0)) {
    throw Error(ErrorKind::InvalidArgument, "percentile rank must lie in [0, 100], got " + std::to_string(p));
  }
  const double rank = static_cast<double>(values.size() - 1) * p / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double lower = values[lo];
  if (frac == 0.0 || lo + 1 >= values.size()) {
    return lower;
  }
  const double upper = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return lower + frac * (upper - lower);
}

inline double percentile(std::span<const double> values, double p) {
  std::vector<double> copy(values.begin(), values.end());
  return percentile_inplace(copy, p);
}

inline double median(std::span<const double> values) { return percentile(values, 50.0); }

inline double mean(std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorKind::EmptyInput, "mean of an empty collection");
  }
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  return sum / static_cast<double>(values.size());
}

}  // namespace stainbench
