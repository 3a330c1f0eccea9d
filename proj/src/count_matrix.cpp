#include "latmap/count_matrix.hpp"

#include <unordered_map>
#include <unordered_set>

#include "latmap/errors.hpp"

namespace latmap {

namespace {

void require_unique(const std::vector<std::string>& ids, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw DataError(std::string("duplicate ") + what + " id '" + id + "'");
  }
}

}  // namespace

CountMatrix::CountMatrix(std::vector<std::string> row_ids, std::vector<std::string> col_ids, CountStorage counts)
    : row_ids_(std::move(row_ids)), col_ids_(std::move(col_ids)), counts_(std::move(counts)) {
  if (static_cast<Index>(row_ids_.size()) != counts_.rows() || static_cast<Index>(col_ids_.size()) != counts_.cols()) {
    throw DimensionError("CountMatrix: id lists (" + std::to_string(row_ids_.size()) + ", " +
                         std::to_string(col_ids_.size()) + ") do not match " + std::to_string(counts_.rows()) + "x" +
                         std::to_string(counts_.cols()) + " counts");
  }
  require_unique(row_ids_, "row");
  require_unique(col_ids_, "column");
  counts_.prune(std::int64_t{0});
  for (Index k = 0; k < counts_.outerSize(); ++k) {
    for (CountStorage::InnerIterator it(counts_, k); it; ++it) {
      if (it.value() < 0) throw DataError("negative count for " + row_ids_[static_cast<std::size_t>(it.row())]);
    }
  }
  counts_.makeCompressed();
}

CountMatrix CountMatrix::from_dense(std::vector<std::string> row_ids, std::vector<std::string> col_ids,
                                    const MatrixX<std::int64_t>& dense) {
  return CountMatrix(std::move(row_ids), std::move(col_ids), dense.sparseView());
}

std::vector<Index> CountMatrix::genes_per_row() const {
  std::vector<Index> out(static_cast<std::size_t>(rows()), 0);
  for (Index r = 0; r < counts_.outerSize(); ++r) {
    for (CountStorage::InnerIterator it(counts_, r); it; ++it) {
      if (it.value() > 0) ++out[static_cast<std::size_t>(r)];
    }
  }
  return out;
}

std::vector<Index> CountMatrix::rows_per_gene() const {
  std::vector<Index> out(static_cast<std::size_t>(cols()), 0);
  for (Index r = 0; r < counts_.outerSize(); ++r) {
    for (CountStorage::InnerIterator it(counts_, r); it; ++it) {
      if (it.value() > 0) ++out[static_cast<std::size_t>(it.col())];
    }
  }
  return out;
}

std::vector<std::int64_t> CountMatrix::row_totals() const {
  std::vector<std::int64_t> out(static_cast<std::size_t>(rows()), 0);
  for (Index r = 0; r < counts_.outerSize(); ++r) {
    for (CountStorage::InnerIterator it(counts_, r); it; ++it) out[static_cast<std::size_t>(r)] += it.value();
  }
  return out;
}

CountMatrix CountMatrix::select_rows(std::span<const Index> rows) const {
  std::vector<Eigen::Triplet<std::int64_t>> trips;
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    if (r < 0 || r >= this->rows()) throw DimensionError("select_rows: index out of range");
    ids.push_back(row_ids_[static_cast<std::size_t>(r)]);
    for (CountStorage::InnerIterator it(counts_, r); it; ++it) {
      trips.emplace_back(static_cast<Index>(i), it.col(), it.value());
    }
  }
  CountStorage m(static_cast<Index>(rows.size()), cols());
  m.setFromTriplets(trips.begin(), trips.end());
  return CountMatrix(std::move(ids), col_ids_, std::move(m));
}

CountMatrix CountMatrix::select_cols(std::span<const Index> cols) const {
  std::vector<Index> remap(static_cast<std::size_t>(this->cols()), -1);
  std::vector<std::string> ids;
  ids.reserve(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const Index c = cols[j];
    if (c < 0 || c >= this->cols()) throw DimensionError("select_cols: index out of range");
    remap[static_cast<std::size_t>(c)] = static_cast<Index>(j);
    ids.push_back(col_ids_[static_cast<std::size_t>(c)]);
  }
  std::vector<Eigen::Triplet<std::int64_t>> trips;
  for (Index r = 0; r < counts_.outerSize(); ++r) {
    for (CountStorage::InnerIterator it(counts_, r); it; ++it) {
      const Index j = remap[static_cast<std::size_t>(it.col())];
      if (j >= 0) trips.emplace_back(r, j, it.value());
    }
  }
  CountStorage m(rows(), static_cast<Index>(cols.size()));
  m.setFromTriplets(trips.begin(), trips.end());
  return CountMatrix(row_ids_, std::move(ids), std::move(m));
}

CountMatrix CountMatrix::select_cols(std::span<const std::string> ids) const {
  std::unordered_map<std::string, Index> pos;
  for (std::size_t j = 0; j < col_ids_.size(); ++j) pos.emplace(col_ids_[j], static_cast<Index>(j));
  std::vector<Index> idx;
  std::string missing;
  for (const auto& id : ids) {
    auto it = pos.find(id);
    if (it == pos.end()) {
      missing += (missing.empty() ? "" : ", ") + id;
    } else {
      idx.push_back(it->second);
    }
  }
  if (!missing.empty()) throw DataError("genes missing from matrix: " + missing);
  return select_cols(std::span<const Index>(idx));
}

bool operator==(const CountMatrix& a, const CountMatrix& b) {
  if (a.row_ids_ != b.row_ids_ || a.col_ids_ != b.col_ids_) return false;
  return a.to_dense() == b.to_dense();
}

}  // namespace latmap
