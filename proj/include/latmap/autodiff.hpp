#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "latmap/types.hpp"

/**
 * @file autodiff.hpp
 *
 * Dense 2-D tensors with reverse-mode differentiation.
 *
 * Every operation that touches a gradient-requiring input records a node with
 * its inputs and a backward rule. `backward()` orders the reachable nodes
 * topologically (a `Tape`) and visits each once in reverse. Leaf gradients
 * accumulate across calls until `zero_grad()`; intermediate gradients are reset
 * on each call.
 */

namespace latmap::ad {

struct Node;

/**
 * Handle to a dense 2-D value, optionally tracked for differentiation.
 * Copies share the underlying node. Scalars are 1x1, vectors n x 1.
 */
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false, std::string name = {});

  static Tensor scalar(double v);
  /// Trainable leaf.
  static Tensor parameter(Matrix value, std::string name);

  const Matrix& value() const;
  /// Raw access for optimizers and finite-difference probes. Only valid on leaves.
  Matrix& mutable_value();

  bool has_grad() const;
  const Matrix& grad() const;
  void zero_grad();

  bool requires_grad() const;
  bool is_leaf() const;
  const std::string& name() const;

  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Index size() const { return value().size(); }
  double item() const;

  /// Same values, no history.
  Tensor detach() const;

  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Matrix, std::vector<Tensor>, std::function<void(Node&)>, const char*);

  std::shared_ptr<Node> node_;
};

struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;
  bool leaf = true;
  std::string name;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  /// grad += g, allocating on first use.
  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

/// Ordered record of the operations reachable from a root. Inputs always
/// precede the entries that consume them.
class Tape {
 public:
  static Tape record(const Tensor& root);
  const std::vector<Node*>& entries() const { return entries_; }

 private:
  std::vector<Node*> entries_;
};

/// Smallest |input| over the ReLU operations reachable from `root`, or
/// infinity when there are none. Central differences with step h only see the
/// gradient when this is comfortably larger than h.
double relu_margin(const Tensor& root);

/// Disables graph recording in scope (evaluation passes over frozen models).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

void backward(const Tensor& loss);

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// Constant sparse left operand, e.g. a normalized adjacency.
Tensor spmm(const SparseMatrix& s, const Tensor& b);

// Elementwise, same shapes
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// a (n x m) plus a 1 x m row broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, double factor);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log1p(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);

// Reductions and reshaping
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor row_sum(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
/// Rows of `a` in the given order.
Tensor select_rows(const Tensor& a, std::span<const Index> rows);
/// Entries of `a` at flat row-major positions, as a column.
Tensor gather(const Tensor& a, std::span<const Index> flat);

/// Mean over entries of max(z,0) - z*y + log(1 + exp(-|z|)); labels must be 0 or 1.
Tensor bce_with_logits(const Tensor& logits, const Matrix& labels);

/// Mean over rows of the squared error summed across columns.
Tensor squared_error(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

}  // namespace latmap::ad
