#pragma once

// Small statistics helpers shared by the unit and acceptance tests. Kept
// independent of the library so they can serve as oracles.

#include <cmath>
#include <cstddef>
#include <vector>

namespace testutil {

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double covariance(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a);
  const double mb = mean(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size() - 1);
}

// Standard error of a sample variance for Gaussian data.
inline double variance_se(double var, std::size_t n) {
  return var * std::sqrt(2.0 / static_cast<double>(n - 1));
}

}  // namespace testutil
