#pragma once

#include <span>
#include <string>
#include <vector>

#include "latmap/count_matrix.hpp"

namespace latmap {

enum class PanelProvenance { hvg2000, shared500, custom };

/// Ordered gene list; the order is the column order of every matrix built on it.
struct GenePanel {
  std::vector<std::string> genes;
  PanelProvenance provenance = PanelProvenance::custom;
};

/// Drops rows expressing fewer than `min_genes` distinct genes. Throws
/// DataError("all cells filtered") if nothing survives.
CountMatrix filter_cells(const CountMatrix& m, Index min_genes = 200);

/// Drops genes with nonzero counts in fewer than `min_cells` rows.
CountMatrix filter_genes(const CountMatrix& m, Index min_cells = 60);

struct MitoRiboOptions {
  std::vector<std::string> mito_prefixes{"MT-", "MRP"};
  std::vector<std::string> ribo_prefixes{"RPS", "RPL"};
  double max_fraction = 0.2;
};

/// Drops rows whose mito+ribo share of the total count exceeds
/// `max_fraction`. Rows with zero total are dropped and reported in `warnings`.
CountMatrix filter_mito_ribo(const CountMatrix& m, const MitoRiboOptions& opts = {},
                             std::vector<std::string>* warnings = nullptr);

/// Scales every row to `target_sum` and applies log1p.
Matrix normalize_log1p(const CountMatrix& m, double target_sum = 1e4);

/// Per-gene variance/mean of a normalized matrix (0 where the mean is 0).
Vector gene_dispersion(const Matrix& normed);

/**
 * Top `n` genes by dispersion. Genes with zero mean rank after all others;
 * equal dispersions are ordered by gene id.
 */
GenePanel select_hvg(const Matrix& normed, std::span<const std::string> gene_ids, Index n);

/**
 * Genes present in both matrices, ranked by dispersion of the normalized sc
 * data, top `n`. Throws DataError if fewer than `n` genes are shared.
 */
GenePanel intersect_panel(const CountMatrix& sc, const CountMatrix& st, Index n = 500, double target_sum = 1e4);

struct QcOptions {
  Index min_genes = 200;
  Index min_cells = 60;
  MitoRiboOptions mito_ribo;
};

struct QcSummary {
  Index rows_in = 0;
  Index cols_in = 0;
  Index dropped_by_min_genes = 0;
  Index dropped_by_min_cells = 0;
  Index dropped_by_mito_ribo = 0;
  std::vector<std::string> warnings;
};

/// filter_cells, then filter_genes, then filter_mito_ribo, once each.
CountMatrix run_qc(const CountMatrix& m, const QcOptions& opts, QcSummary* summary = nullptr);

}  // namespace latmap
