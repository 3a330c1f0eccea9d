#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latmap/errors.hpp"
#include "latmap/types.hpp"

namespace latmap {

/// Codes with categorical labels; labels are indices into `vocabulary`.
struct LabeledEmbedding {
  Matrix codes;
  std::vector<int> labels;
  std::vector<std::string> vocabulary;

  Index size() const { return codes.rows(); }

  /// Vocabulary is the sorted set of distinct label strings.
  static LabeledEmbedding from_strings(Matrix codes, const std::vector<std::string>& labels);
};

struct CvReport {
  std::vector<double> fold_accuracy;
  double mean = 0.0;
  double stddev = 0.0;                 // population standard deviation across folds
  MatrixX<std::int64_t> confusion;    // true class (row) x predicted class (column)
  Index k = 0;
  std::vector<int> predictions;        // out-of-fold prediction per row, -1 where a row was never tested
  std::vector<std::string> warnings;

  friend bool operator==(const CvReport&, const CvReport&) = default;
};

/// (1/n) * sum 1[y_hat_i == y_i].
double accuracy(std::span<const int> y, std::span<const int> y_hat);

/// Entry (i, j) counts rows of true class i predicted as j.
MatrixX<std::int64_t> confusion_matrix(std::span<const int> y, std::span<const int> y_hat, Index n_classes);

/**
 * Majority vote among the k nearest training rows (Euclidean). Distance ties
 * go to the smaller training index; vote ties to the class earlier in the
 * vocabulary.
 */
template <typename TrainDerived, typename QueryDerived>
std::vector<int> knn_predict(const Eigen::MatrixBase<TrainDerived>& train, std::span<const int> train_labels,
                             Index n_classes, const Eigen::MatrixBase<QueryDerived>& queries, Index k) {
  using Scalar = typename TrainDerived::Scalar;
  const Index n = train.rows();
  if (k <= 0) throw std::invalid_argument("knn_predict: k must be positive");
  if (k > n) {
    throw std::invalid_argument("knn_predict: k=" + std::to_string(k) + " exceeds " + std::to_string(n) +
                                " training rows");
  }
  if (static_cast<Index>(train_labels.size()) != n) throw DimensionError("knn_predict: label count mismatch");
  if (queries.cols() != train.cols()) throw DimensionError("knn_predict: query width differs from training width");

  std::vector<int> out(static_cast<std::size_t>(queries.rows()));
  std::vector<std::pair<Scalar, Index>> dist(static_cast<std::size_t>(n));
  std::vector<Index> votes(static_cast<std::size_t>(n_classes));
  for (Index q = 0; q < queries.rows(); ++q) {
    for (Index i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = {(train.row(i) - queries.row(q)).squaredNorm(), i};
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::fill(votes.begin(), votes.end(), 0);
    for (Index t = 0; t < k; ++t) ++votes[static_cast<std::size_t>(train_labels[static_cast<std::size_t>(dist[static_cast<std::size_t>(t)].second)])];
    out[static_cast<std::size_t>(q)] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return out;
}

std::vector<int> knn_predict(const LabeledEmbedding& train, const Matrix& queries, Index k);

/// Seeded shuffle cut into `folds` contiguous test folds whose sizes differ by at most one.
std::vector<std::vector<Index>> kfold_split(Index n, Index folds, std::uint64_t seed);

/// Each fold is scored once against a kNN model built on the remaining folds.
CvReport kfold_cv(const LabeledEmbedding& e, Index k_neighbors, Index folds, std::uint64_t seed);
CvReport kfold_cv(const LabeledEmbedding& e, Index k_neighbors, const std::vector<std::vector<Index>>& split);

/// Single train/test split with `test_fraction` of rows held out.
CvReport holdout_eval(const LabeledEmbedding& e, Index k_neighbors, double test_fraction, std::uint64_t seed);

/// kfold_cv for each k on one shared split.
std::vector<std::pair<Index, CvReport>> sweep_k(const LabeledEmbedding& e, const std::vector<Index>& ks, Index folds,
                                                std::uint64_t seed);

/// 1, 3, 5, 10, 15, 20 plus the vocabulary size, sorted and deduplicated.
std::vector<Index> default_k_values(Index n_classes);

/// Adjusted Rand index from the pair-counting contingency table. If the
/// maximum index equals the expected index, returns 1 for identical partitions, else 0.
double ari(std::span<const int> a, std::span<const int> b);

}  // namespace latmap
