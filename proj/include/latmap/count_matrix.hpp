#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latmap/types.hpp"

namespace latmap {

using CountStorage = SparseX<std::int64_t>;

/**
 * Integer cell x gene (or spot x gene) counts with row and column ids.
 *
 * Ids are unique, counts are non-negative, and explicit zeros are never
 * stored, so the number of stored entries in a row is the number of genes the
 * cell expresses.
 */
class CountMatrix {
 public:
  CountMatrix() = default;
  CountMatrix(std::vector<std::string> row_ids, std::vector<std::string> col_ids, CountStorage counts);

  static CountMatrix from_dense(std::vector<std::string> row_ids, std::vector<std::string> col_ids,
                                const MatrixX<std::int64_t>& dense);

  Index rows() const { return counts_.rows(); }
  Index cols() const { return counts_.cols(); }
  const std::vector<std::string>& row_ids() const { return row_ids_; }
  const std::vector<std::string>& col_ids() const { return col_ids_; }
  const CountStorage& counts() const { return counts_; }

  std::int64_t at(Index r, Index c) const { return counts_.coeff(r, c); }
  MatrixX<std::int64_t> to_dense() const { return MatrixX<std::int64_t>(counts_); }

  /// Nonzero genes per row.
  std::vector<Index> genes_per_row() const;
  /// Nonzero rows per gene.
  std::vector<Index> rows_per_gene() const;
  std::vector<std::int64_t> row_totals() const;

  CountMatrix select_rows(std::span<const Index> rows) const;
  CountMatrix select_cols(std::span<const Index> cols) const;
  /// Columns by id, in the given order. Throws DataError listing any missing id.
  CountMatrix select_cols(std::span<const std::string> ids) const;

  friend bool operator==(const CountMatrix& a, const CountMatrix& b);

 private:
  std::vector<std::string> row_ids_;
  std::vector<std::string> col_ids_;
  CountStorage counts_;
};

}  // namespace latmap
