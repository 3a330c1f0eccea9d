#include "latmap/benchmark.hpp"

#include <cmath>
#include <map>
#include <set>

#include "latmap/random.hpp"

namespace latmap {

LabeledEmbedding LabeledEmbedding::from_strings(Matrix codes, const std::vector<std::string>& labels) {
  if (static_cast<Index>(labels.size()) != codes.rows()) throw DimensionError("LabeledEmbedding: label count mismatch");
  LabeledEmbedding e;
  e.codes = std::move(codes);
  std::set<std::string> vocab(labels.begin(), labels.end());
  e.vocabulary.assign(vocab.begin(), vocab.end());
  std::map<std::string, int> pos;
  for (std::size_t i = 0; i < e.vocabulary.size(); ++i) pos[e.vocabulary[i]] = static_cast<int>(i);
  e.labels.reserve(labels.size());
  for (const auto& l : labels) e.labels.push_back(pos.at(l));
  return e;
}

double accuracy(std::span<const int> y, std::span<const int> y_hat) {
  if (y.size() != y_hat.size()) throw DimensionError("accuracy: length mismatch");
  if (y.empty()) throw DimensionError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += (y[i] == y_hat[i]);
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

MatrixX<std::int64_t> confusion_matrix(std::span<const int> y, std::span<const int> y_hat, Index n_classes) {
  if (y.size() != y_hat.size()) throw DimensionError("confusion_matrix: length mismatch");
  MatrixX<std::int64_t> c = MatrixX<std::int64_t>::Zero(n_classes, n_classes);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] >= n_classes || y_hat[i] < 0 || y_hat[i] >= n_classes) {
      throw DataError("confusion_matrix: label outside vocabulary");
    }
    ++c(y[i], y_hat[i]);
  }
  return c;
}

std::vector<int> knn_predict(const LabeledEmbedding& train, const Matrix& queries, Index k) {
  return knn_predict(train.codes, train.labels, static_cast<Index>(train.vocabulary.size()), queries, k);
}

std::vector<std::vector<Index>> kfold_split(Index n, Index folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("kfold_split: folds must be >= 2");
  if (n < folds) throw DataError("kfold_split: " + std::to_string(n) + " rows for " + std::to_string(folds) + " folds");
  Rng rng(seed);
  const auto order = rng.permutation(n);
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(folds));
  Index start = 0;
  for (Index f = 0; f < folds; ++f) {
    const Index len = n / folds + (f < n % folds ? 1 : 0);
    out[static_cast<std::size_t>(f)].assign(order.begin() + start, order.begin() + start + len);
    start += len;
  }
  return out;
}

namespace {

void finish(CvReport& r) {
  const double nf = static_cast<double>(r.fold_accuracy.size());
  r.mean = std::accumulate(r.fold_accuracy.begin(), r.fold_accuracy.end(), 0.0) / nf;
  double ss = 0.0;
  for (double a : r.fold_accuracy) ss += (a - r.mean) * (a - r.mean);
  r.stddev = std::sqrt(ss / nf);
}

void score_fold(const LabeledEmbedding& e, Index k, const std::vector<Index>& test, const std::vector<Index>& train,
                CvReport& r, Index fold) {
  const Index n_classes = static_cast<Index>(e.vocabulary.size());
  Matrix train_codes(static_cast<Index>(train.size()), e.codes.cols());
  std::vector<int> train_labels;
  std::vector<char> present(static_cast<std::size_t>(n_classes), 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    train_codes.row(static_cast<Index>(i)) = e.codes.row(train[i]);
    const int l = e.labels[static_cast<std::size_t>(train[i])];
    train_labels.push_back(l);
    present[static_cast<std::size_t>(l)] = 1;
  }
  Matrix test_codes(static_cast<Index>(test.size()), e.codes.cols());
  std::vector<int> y;
  for (std::size_t i = 0; i < test.size(); ++i) {
    test_codes.row(static_cast<Index>(i)) = e.codes.row(test[i]);
    const int l = e.labels[static_cast<std::size_t>(test[i])];
    y.push_back(l);
    if (!present[static_cast<std::size_t>(l)]) {
      r.warnings.push_back("fold " + std::to_string(fold) + ": class '" + e.vocabulary[static_cast<std::size_t>(l)] +
                           "' absent from training split");
    }
  }
  const auto y_hat = knn_predict(train_codes, train_labels, n_classes, test_codes, k);
  for (std::size_t i = 0; i < test.size(); ++i) r.predictions[static_cast<std::size_t>(test[i])] = y_hat[i];
  r.fold_accuracy.push_back(accuracy(y, y_hat));
  r.confusion += confusion_matrix(y, y_hat, n_classes);
}

}  // namespace

CvReport kfold_cv(const LabeledEmbedding& e, Index k_neighbors, const std::vector<std::vector<Index>>& split) {
  CvReport r;
  r.k = k_neighbors;
  const Index n_classes = static_cast<Index>(e.vocabulary.size());
  r.confusion = MatrixX<std::int64_t>::Zero(n_classes, n_classes);
  r.predictions.assign(static_cast<std::size_t>(e.size()), -1);
  for (std::size_t f = 0; f < split.size(); ++f) {
    std::vector<Index> train;
    for (std::size_t g = 0; g < split.size(); ++g) {
      if (g != f) train.insert(train.end(), split[g].begin(), split[g].end());
    }
    std::sort(train.begin(), train.end());
    score_fold(e, k_neighbors, split[f], train, r, static_cast<Index>(f));
  }
  finish(r);
  return r;
}

CvReport kfold_cv(const LabeledEmbedding& e, Index k_neighbors, Index folds, std::uint64_t seed) {
  return kfold_cv(e, k_neighbors, kfold_split(e.size(), folds, seed));
}

CvReport holdout_eval(const LabeledEmbedding& e, Index k_neighbors, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("holdout_eval: fraction must be in (0,1)");
  Rng rng(seed);
  auto order = rng.permutation(e.size());
  const auto n_test = std::max<Index>(1, static_cast<Index>(std::llround(test_fraction * static_cast<double>(e.size()))));
  std::vector<Index> test(order.begin(), order.begin() + n_test);
  std::vector<Index> train(order.begin() + n_test, order.end());
  std::sort(train.begin(), train.end());
  CvReport r;
  r.k = k_neighbors;
  const Index n_classes = static_cast<Index>(e.vocabulary.size());
  r.confusion = MatrixX<std::int64_t>::Zero(n_classes, n_classes);
  r.predictions.assign(static_cast<std::size_t>(e.size()), -1);
  score_fold(e, k_neighbors, test, train, r, 0);
  finish(r);
  return r;
}

std::vector<std::pair<Index, CvReport>> sweep_k(const LabeledEmbedding& e, const std::vector<Index>& ks, Index folds,
                                                std::uint64_t seed) {
  if (ks.empty()) throw std::invalid_argument("sweep_k: empty k list");
  const auto split = kfold_split(e.size(), folds, seed);
  std::vector<std::pair<Index, CvReport>> out;
  for (Index k : ks) out.emplace_back(k, kfold_cv(e, k, split));
  return out;
}

std::vector<Index> default_k_values(Index n_classes) {
  std::vector<Index> ks{1, 3, 5, 10, 15, 20, n_classes};
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::erase_if(ks, [](Index k) { return k <= 0; });
  return ks;
}

namespace {

std::vector<int> canonical(std::span<const int> a) {
  std::map<int, int> first;
  std::vector<int> out;
  out.reserve(a.size());
  for (int v : a) out.push_back(first.try_emplace(v, static_cast<int>(first.size())).first->second);
  return out;
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double ari(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw DimensionError("ari: length mismatch");
  const auto ca = canonical(a);
  const auto cb = canonical(b);
  const int ra = ca.empty() ? 0 : *std::max_element(ca.begin(), ca.end()) + 1;
  const int rb = cb.empty() ? 0 : *std::max_element(cb.begin(), cb.end()) + 1;
  MatrixX<std::int64_t> table = MatrixX<std::int64_t>::Zero(ra, rb);
  for (std::size_t i = 0; i < ca.size(); ++i) ++table(ca[i], cb[i]);

  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (Index i = 0; i < ra; ++i) {
    sum_a += choose2(static_cast<double>(table.row(i).sum()));
    for (Index j = 0; j < rb; ++j) index += choose2(static_cast<double>(table(i, j)));
  }
  for (Index j = 0; j < rb; ++j) sum_b += choose2(static_cast<double>(table.col(j).sum()));
  const double total = choose2(static_cast<double>(ca.size()));
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return ca == cb ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace latmap
