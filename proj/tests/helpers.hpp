#pragma once

#include <cmath>
#include <vector>

#include "ictd/numerics.hpp"

namespace testing {

inline ictd::Matrix random_matrix(std::size_t r, std::size_t c, ictd::SeededRng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  ictd::Matrix m(r, c);
  for (double& x : m.data()) x = rng.uniform(lo, hi);
  return m;
}

inline double max_abs_diff(const ictd::Matrix& a, const ictd::Matrix& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a.data()[k] - b.data()[k]));
  return worst;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  return worst;
}

inline ictd::Matrix naive_product(const ictd::Matrix& a, const ictd::Matrix& b) {
  ictd::Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

}  // namespace testing
