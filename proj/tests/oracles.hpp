#pragma once

// Brute-force reference implementations. Deliberately naive: loops over
// entries, no shared code with the library beyond the Matrix typedefs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "latmap/types.hpp"

namespace oracle {

using latmap::Index;
using latmap::Matrix;

inline double accuracy(const std::vector<int>& y, const std::vector<int>& y_hat) {
  int hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += y[i] == y_hat[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

inline std::vector<std::vector<std::int64_t>> confusion(const std::vector<int>& y, const std::vector<int>& y_hat,
                                                        int n_classes) {
  std::vector<std::vector<std::int64_t>> c(n_classes, std::vector<std::int64_t>(n_classes, 0));
  for (int a = 0; a < n_classes; ++a) {
    for (int b = 0; b < n_classes; ++b) {
      for (std::size_t i = 0; i < y.size(); ++i) c[a][b] += (y[i] == a && y_hat[i] == b) ? 1 : 0;
    }
  }
  return c;
}

/// Exhaustive kNN: full sort of (distance, index) pairs, ties by lower index,
/// vote ties by lower class id.
inline std::vector<int> knn(const Matrix& train, const std::vector<int>& labels, int n_classes, const Matrix& queries,
                            int k) {
  std::vector<int> out;
  for (Index q = 0; q < queries.rows(); ++q) {
    std::vector<std::pair<double, Index>> d;
    for (Index i = 0; i < train.rows(); ++i) {
      double s = 0.0;
      for (Index j = 0; j < train.cols(); ++j) {
        const double diff = train(i, j) - queries(q, j);
        s += diff * diff;
      }
      d.emplace_back(s, i);
    }
    std::sort(d.begin(), d.end());
    std::vector<int> votes(n_classes, 0);
    for (int t = 0; t < k; ++t) ++votes[labels[d[t].second]];
    int best = 0;
    for (int c = 1; c < n_classes; ++c) {
      if (votes[c] > votes[best]) best = c;
    }
    out.push_back(best);
  }
  return out;
}

/// Adjusted Rand index by counting agreeing pairs directly.
inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, only_a = 0, only_b = 0, neither = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      if (sa && sb) both += 1;
      else if (sa) only_a += 1;
      else if (sb) only_b += 1;
      else neither += 1;
    }
  }
  const double pairs = both + only_a + only_b + neither;
  const double same_a = both + only_a;
  const double same_b = both + only_b;
  const double expected = same_a * same_b / pairs;
  const double max_index = 0.5 * (same_a + same_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

inline double squared_row_distance_mean(const Matrix& a, const Matrix& b) {
  double total = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (Index j = 0; j < a.cols(); ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
    total += s;
  }
  return total / static_cast<double>(a.rows());
}

inline double kl_gaussian(const Matrix& mu, const Matrix& logvar) {
  double total = 0.0;
  for (Index i = 0; i < mu.rows(); ++i) {
    for (Index j = 0; j < mu.cols(); ++j) {
      total += 0.5 * (std::exp(logvar(i, j)) + mu(i, j) * mu(i, j) - 1.0 - logvar(i, j));
    }
  }
  return total / static_cast<double>(mu.rows());
}

inline double naive_bce(const std::vector<double>& z, const std::vector<double>& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-z[i]));
    total += -(y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
  }
  return total / static_cast<double>(z.size());
}

/// Gene dispersion var/mean with population variance; 0 when the mean is 0.
inline double dispersion(const std::vector<double>& col) {
  double mean = 0.0;
  for (double v : col) mean += v;
  mean /= static_cast<double>(col.size());
  double var = 0.0;
  for (double v : col) var += (v - mean) * (v - mean);
  var /= static_cast<double>(col.size());
  return mean > 0.0 ? var / mean : 0.0;
}

/// Undirected kNN edges (i < j) from all pairwise distances.
inline std::set<std::pair<Index, Index>> knn_edges(const Matrix& xy, int k) {
  std::set<std::pair<Index, Index>> e;
  for (Index i = 0; i < xy.rows(); ++i) {
    std::vector<std::pair<double, Index>> d;
    for (Index j = 0; j < xy.rows(); ++j) {
      if (j == i) continue;
      const double dx = xy(i, 0) - xy(j, 0);
      const double dy = xy(i, 1) - xy(j, 1);
      d.emplace_back(dx * dx + dy * dy, j);
    }
    std::sort(d.begin(), d.end());
    for (int t = 0; t < k; ++t) e.insert({std::min(i, d[t].second), std::max(i, d[t].second)});
  }
  return e;
}

/// Central-difference derivative of a scalar function of one matrix entry.
inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Area under the ROC curve by comparing every positive with every negative.
inline double auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace oracle
