#pragma once

// Independent reference computations used only by tests. None of these call
// into the library's kernels or numerics beyond plain data access.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "ald/numerics.hpp"

namespace oracle {

// Textbook closed form sum (x - xbar)(y - ybar) / sum (x - xbar)^2.
inline double slope(std::span<const double> ys) {
  const double n = static_cast<double>(ys.size());
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t j = 0; j < ys.size(); ++j) {
    xbar += static_cast<double>(j);
    ybar += ys[j];
  }
  xbar /= n;
  ybar /= n;
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < ys.size(); ++j) {
    num += (static_cast<double>(j) - xbar) * (ys[j] - ybar);
    den += (static_cast<double>(j) - xbar) * (static_cast<double>(j) - xbar);
  }
  return num / den;
}

// Direct evaluation of s_i = (b_i - a_i) / max(a_i, b_i), averaged.
inline double silhouette(const ald::Matrix& pts, const std::vector<int>& labels) {
  const std::size_t n = pts.rows();
  auto dist = [&](std::size_t i, std::size_t j) {
    long double acc = 0.0L;
    for (std::size_t k = 0; k < pts.cols(); ++k) {
      const long double d = static_cast<long double>(pts(i, k)) - pts(j, k);
      acc += d * d;
    }
    return std::sqrt(acc);
  };
  long double total = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<int, std::pair<long double, int>> per_cluster;  // sum, count (excluding i)
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      auto& e = per_cluster[labels[j]];
      e.first += dist(i, j);
      e.second += 1;
    }
    const int own = labels[i];
    const int own_others = per_cluster.count(own) ? per_cluster[own].second : 0;
    if (own_others == 0) continue;  // singleton
    const long double a = per_cluster[own].first / own_others;
    long double b = std::numeric_limits<long double>::infinity();
    for (const auto& [label, e] : per_cluster)
      if (label != own) b = std::min(b, e.first / e.second);
    total += (b - a) / std::max(a, b);
  }
  return static_cast<double>(total / n);
}

// Frechet distance between Gaussians with diagonal covariances.
inline double gaussian_frechet_diagonal(const std::vector<double>& mean_a, const std::vector<double>& var_a,
                                        const std::vector<double>& mean_b, const std::vector<double>& var_b) {
  double total = 0.0;
  for (std::size_t i = 0; i < mean_a.size(); ++i) {
    const double dm = mean_a[i] - mean_b[i];
    total += dm * dm + var_a[i] + var_b[i] - 2.0 * std::sqrt(var_a[i] * var_b[i]);
  }
  return total;
}

}  // namespace oracle
