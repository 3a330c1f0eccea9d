#pragma once

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <utility>
#include <vector>

#include "latmap/autodiff.hpp"
#include "latmap/errors.hpp"

namespace latmap {

/**
 * Undirected spot graph. `adjacency` is symmetric 0/1 without self-loops;
 * `norm_adj` is D^-1/2 (A + I) D^-1/2 with D the degree of A + I.
 */
struct SpatialGraph {
  Index n = 0;
  std::vector<std::pair<Index, Index>> edges;  // i < j, sorted
  SparseMatrix adjacency;
  SparseMatrix norm_adj;
};

SparseMatrix normalize_adjacency(const SparseMatrix& adjacency);

/// Graph over `n` nodes from undirected edges (either orientation, duplicates and self-loops dropped).
SpatialGraph graph_from_edges(Index n, std::vector<std::pair<Index, Index>> edges);

/**
 * Connects every spot to its k nearest Euclidean neighbours (distance ties go
 * to the smaller index) and symmetrizes by union.
 */
template <typename Derived>
SpatialGraph build_knn_graph(const Eigen::MatrixBase<Derived>& coords, Index k = 6) {
  using Scalar = typename Derived::Scalar;
  const Index n = coords.rows();
  if (coords.cols() != 2) throw DimensionError("build_knn_graph: coordinates must have 2 columns");
  if (k <= 0) throw std::invalid_argument("build_knn_graph: k must be positive");
  if (n <= k) {
    throw DataError("build_knn_graph: need more than k=" + std::to_string(k) + " spots, got " + std::to_string(n));
  }
  if (!coords.allFinite()) throw DataError("build_knn_graph: non-finite coordinates");

  std::vector<std::pair<Index, Index>> edges;
  edges.reserve(static_cast<std::size_t>(n * k));
  std::vector<std::pair<Scalar, Index>> dist(static_cast<std::size_t>(n - 1));
  for (Index i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      dist[m++] = {(coords.row(i) - coords.row(j)).squaredNorm(), j};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    for (Index t = 0; t < k; ++t) edges.emplace_back(i, dist[static_cast<std::size_t>(t)].second);
  }
  return graph_from_edges(n, std::move(edges));
}

/// relu(A_hat H W), or the linear form when `activate` is false.
ad::Tensor gcn_layer(const SparseMatrix& a_hat, const ad::Tensor& h, const ad::Tensor& w, bool activate = true);

/// `i j` per line.
void write_edge_list(const std::filesystem::path& path, const SpatialGraph& g);

/// Isotropic map from tissue coordinates to a zero-mean, unit-RMS model frame.
struct CoordinateTransform {
  double center_x = 0.0;
  double center_y = 0.0;
  double scale = 1.0;  // RMS distance from the center

  static CoordinateTransform fit(const Matrix& xy);
  Matrix normalize(const Matrix& xy) const;
  Matrix denormalize(const Matrix& xy) const;
};

}  // namespace latmap
