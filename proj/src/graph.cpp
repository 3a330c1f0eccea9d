#include "latmap/graph.hpp"

#include <cmath>
#include <fstream>

namespace latmap {

SparseMatrix normalize_adjacency(const SparseMatrix& adjacency) {
  const Index n = adjacency.rows();
  if (adjacency.cols() != n) throw DimensionError("normalize_adjacency: matrix is not square");
  SparseMatrix a = adjacency;
  for (Index i = 0; i < n; ++i) a.coeffRef(i, i) = 1.0;
  a.makeCompressed();
  Vector deg = Vector::Zero(n);
  for (Index r = 0; r < a.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) deg(r) += it.value();
  }
  const Vector inv_sqrt = deg.array().rsqrt().matrix();
  for (Index r = 0; r < a.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) it.valueRef() *= inv_sqrt(r) * inv_sqrt(it.col());
  }
  return a;
}

SpatialGraph graph_from_edges(Index n, std::vector<std::pair<Index, Index>> edges) {
  SpatialGraph g;
  g.n = n;
  for (auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n) throw DimensionError("graph_from_edges: node index out of range");
    if (i > j) std::swap(i, j);
  }
  std::erase_if(edges, [](const auto& e) { return e.first == e.second; });
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(edges.size() * 2);
  for (const auto& [i, j] : edges) {
    trips.emplace_back(i, j, 1.0);
    trips.emplace_back(j, i, 1.0);
  }
  g.adjacency = SparseMatrix(n, n);
  g.adjacency.setFromTriplets(trips.begin(), trips.end());
  g.edges = std::move(edges);
  g.norm_adj = normalize_adjacency(g.adjacency);
  return g;
}

ad::Tensor gcn_layer(const SparseMatrix& a_hat, const ad::Tensor& h, const ad::Tensor& w, bool activate) {
  if (a_hat.cols() != h.rows()) throw DimensionError("gcn_layer: adjacency and feature rows differ");
  ad::Tensor out = ad::spmm(a_hat, ad::matmul(h, w));
  return activate ? ad::relu(out) : out;
}

void write_edge_list(const std::filesystem::path& path, const SpatialGraph& g) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [i, j] : g.edges) out << i << " " << j << "\n";
}

CoordinateTransform CoordinateTransform::fit(const Matrix& xy) {
  if (xy.cols() != 2 || xy.rows() == 0) throw DimensionError("CoordinateTransform::fit: need n x 2 coordinates");
  CoordinateTransform t;
  t.center_x = xy.col(0).mean();
  t.center_y = xy.col(1).mean();
  const double ms = ((xy.col(0).array() - t.center_x).square() + (xy.col(1).array() - t.center_y).square()).mean();
  t.scale = ms > 0.0 ? std::sqrt(ms) : 1.0;
  return t;
}

Matrix CoordinateTransform::normalize(const Matrix& xy) const {
  Matrix out(xy.rows(), 2);
  out.col(0) = (xy.col(0).array() - center_x) / scale;
  out.col(1) = (xy.col(1).array() - center_y) / scale;
  return out;
}

Matrix CoordinateTransform::denormalize(const Matrix& xy) const {
  Matrix out(xy.rows(), 2);
  out.col(0) = xy.col(0).array() * scale + center_x;
  out.col(1) = xy.col(1).array() * scale + center_y;
  return out;
}

}  // namespace latmap
