#include "latmap/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <unordered_set>

#include "latmap/errors.hpp"

namespace latmap {

namespace {

bool has_prefix_ci(const std::string& s, const std::string& prefix) {
  if (prefix.size() > s.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::toupper(static_cast<unsigned char>(s[i])) != std::toupper(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace

CountMatrix filter_cells(const CountMatrix& m, Index min_genes) {
  if (min_genes < 0) throw std::invalid_argument("filter_cells: min_genes must be >= 0");
  const auto expressed = m.genes_per_row();
  std::vector<Index> keep;
  for (Index r = 0; r < m.rows(); ++r) {
    if (expressed[static_cast<std::size_t>(r)] >= min_genes) keep.push_back(r);
  }
  if (keep.empty()) throw DataError("all cells filtered");
  return m.select_rows(std::span<const Index>(keep));
}

CountMatrix filter_genes(const CountMatrix& m, Index min_cells) {
  if (min_cells < 0) throw std::invalid_argument("filter_genes: min_cells must be >= 0");
  const auto expressed = m.rows_per_gene();
  std::vector<Index> keep;
  for (Index c = 0; c < m.cols(); ++c) {
    if (expressed[static_cast<std::size_t>(c)] >= min_cells) keep.push_back(c);
  }
  if (keep.empty()) throw DataError("all genes filtered");
  return m.select_cols(std::span<const Index>(keep));
}

CountMatrix filter_mito_ribo(const CountMatrix& m, const MitoRiboOptions& opts, std::vector<std::string>* warnings) {
  if (opts.max_fraction < 0.0 || opts.max_fraction > 1.0) {
    throw std::invalid_argument("filter_mito_ribo: max_fraction must lie in [0, 1]");
  }
  std::vector<char> flagged(static_cast<std::size_t>(m.cols()), 0);
  for (Index c = 0; c < m.cols(); ++c) {
    const auto& g = m.col_ids()[static_cast<std::size_t>(c)];
    for (const auto* list : {&opts.mito_prefixes, &opts.ribo_prefixes}) {
      for (const auto& p : *list) {
        if (has_prefix_ci(g, p)) flagged[static_cast<std::size_t>(c)] = 1;
      }
    }
  }
  std::vector<Index> keep;
  for (Index r = 0; r < m.rows(); ++r) {
    std::int64_t total = 0, marked = 0;
    for (CountStorage::InnerIterator it(m.counts(), r); it; ++it) {
      total += it.value();
      if (flagged[static_cast<std::size_t>(it.col())]) marked += it.value();
    }
    if (total == 0) {
      if (warnings) warnings->push_back("row '" + m.row_ids()[static_cast<std::size_t>(r)] + "' has zero total counts; removed");
      continue;
    }
    if (static_cast<double>(marked) / static_cast<double>(total) <= opts.max_fraction) keep.push_back(r);
  }
  if (keep.empty()) throw DataError("all cells filtered");
  return m.select_rows(std::span<const Index>(keep));
}

Matrix normalize_log1p(const CountMatrix& m, double target_sum) {
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  const auto totals = m.row_totals();
  for (Index r = 0; r < m.rows(); ++r) {
    const auto total = totals[static_cast<std::size_t>(r)];
    if (total <= 0) {
      throw DataError("normalize_log1p: row '" + m.row_ids()[static_cast<std::size_t>(r)] + "' has zero total counts");
    }
    const double factor = target_sum / static_cast<double>(total);
    for (CountStorage::InnerIterator it(m.counts(), r); it; ++it) {
      out(r, it.col()) = std::log1p(static_cast<double>(it.value()) * factor);
    }
  }
  return out;
}

Vector gene_dispersion(const Matrix& normed) {
  const auto n = static_cast<double>(normed.rows());
  Vector disp(normed.cols());
  for (Index c = 0; c < normed.cols(); ++c) {
    const double mean = normed.col(c).sum() / n;
    if (mean <= 0.0) {
      disp(c) = 0.0;
      continue;
    }
    const double var = (normed.col(c).array() - mean).square().sum() / n;
    disp(c) = var / mean;
  }
  return disp;
}

GenePanel select_hvg(const Matrix& normed, std::span<const std::string> gene_ids, Index n) {
  if (static_cast<Index>(gene_ids.size()) != normed.cols()) {
    throw DimensionError("select_hvg: " + std::to_string(gene_ids.size()) + " ids for " +
                         std::to_string(normed.cols()) + " columns");
  }
  if (n < 0 || n > normed.cols()) {
    throw DataError("select_hvg: requested " + std::to_string(n) + " genes but only " +
                    std::to_string(normed.cols()) + " are available");
  }
  const Vector disp = gene_dispersion(normed);
  std::vector<char> zero_mean(static_cast<std::size_t>(normed.cols()));
  for (Index c = 0; c < normed.cols(); ++c) zero_mean[static_cast<std::size_t>(c)] = normed.col(c).sum() <= 0.0;

  std::vector<Index> order(static_cast<std::size_t>(normed.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
    if (zero_mean[ua] != zero_mean[ub]) return zero_mean[ua] < zero_mean[ub];
    if (disp(a) != disp(b)) return disp(a) > disp(b);
    return gene_ids[ua] < gene_ids[ub];
  });
  GenePanel panel;
  panel.provenance = PanelProvenance::custom;
  for (Index i = 0; i < n; ++i) panel.genes.push_back(gene_ids[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  return panel;
}

GenePanel intersect_panel(const CountMatrix& sc, const CountMatrix& st, Index n, double target_sum) {
  if (sc.rows() == 0 || st.rows() == 0) throw DataError("intersect_panel: empty matrix");
  std::unordered_set<std::string> st_genes(st.col_ids().begin(), st.col_ids().end());
  std::vector<Index> shared_cols;
  std::vector<std::string> shared_ids;
  for (Index c = 0; c < sc.cols(); ++c) {
    const auto& g = sc.col_ids()[static_cast<std::size_t>(c)];
    if (st_genes.count(g)) {
      shared_cols.push_back(c);
      shared_ids.push_back(g);
    }
  }
  if (static_cast<Index>(shared_ids.size()) < n) {
    throw DataError("intersect_panel: only " + std::to_string(shared_ids.size()) + " shared genes, need " +
                    std::to_string(n));
  }
  const Matrix normed = normalize_log1p(sc, target_sum);
  Matrix shared(normed.rows(), static_cast<Index>(shared_cols.size()));
  for (std::size_t j = 0; j < shared_cols.size(); ++j) shared.col(static_cast<Index>(j)) = normed.col(shared_cols[j]);
  auto panel = select_hvg(shared, shared_ids, n);
  panel.provenance = PanelProvenance::shared500;
  return panel;
}

CountMatrix run_qc(const CountMatrix& m, const QcOptions& opts, QcSummary* summary) {
  QcSummary s;
  s.rows_in = m.rows();
  s.cols_in = m.cols();
  auto a = filter_cells(m, opts.min_genes);
  s.dropped_by_min_genes = m.rows() - a.rows();
  auto b = filter_genes(a, opts.min_cells);
  s.dropped_by_min_cells = a.cols() - b.cols();
  auto c = filter_mito_ribo(b, opts.mito_ribo, &s.warnings);
  s.dropped_by_mito_ribo = b.rows() - c.rows();
  if (summary) *summary = std::move(s);
  return c;
}

}  // namespace latmap
