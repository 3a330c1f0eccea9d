#include "latmap/autodiff.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "latmap/errors.hpp"

namespace latmap::ad {

namespace {

thread_local bool g_grad_enabled = true;

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << "x" << m.cols() << "]";
  return os.str();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
                         shape_str(b.value()));
  }
}

}  // namespace

Tensor make_result(Matrix value, std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn,
                   const char* op) {
  if (!value.allFinite()) {
    throw NumericError(std::string(op) + ": non-finite result");
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->leaf = false;
  node->name = op;
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& t : inputs) track = track || t.requires_grad();
  }
  if (track) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

Tensor::Tensor(Matrix value, bool requires_grad, std::string name) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  node_->name = std::move(name);
}

Tensor Tensor::scalar(double v) { return Tensor(Matrix::Constant(1, 1, v)); }

Tensor Tensor::parameter(Matrix value, std::string name) {
  return Tensor(std::move(value), true, std::move(name));
}

const Matrix& Tensor::value() const { return node_->value; }

Matrix& Tensor::mutable_value() {
  if (!node_->leaf) throw std::logic_error("mutable_value on a non-leaf tensor");
  return node_->value;
}

bool Tensor::has_grad() const { return node_->grad.size() != 0; }
const Matrix& Tensor::grad() const { return node_->grad; }
void Tensor::zero_grad() { node_->grad.resize(0, 0); }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->leaf; }
const std::string& Tensor::name() const { return node_->name; }

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on non-scalar tensor " + shape_str(value()));
  return value()(0, 0);
}

Tensor Tensor::detach() const { return Tensor(node_->value); }

Tape Tape::record(const Tensor& root) {
  Tape tape;
  if (!root.requires_grad()) return tape;
  // Iterative post-order DFS; inputs are visited in declaration order so the
  // resulting order (and therefore accumulation order) is deterministic.
  std::unordered_set<const Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      tape.entries_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

double relu_margin(const Tensor& root) {
  double m = std::numeric_limits<double>::infinity();
  const Tape tape = Tape::record(root);
  for (const Node* n : tape.entries()) {
    if (n->name == "relu") m = std::min(m, n->inputs.front()->value.cwiseAbs().minCoeff());
  }
  return m;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw DimensionError("backward: loss must be a scalar tensor");
  }
  if (!loss.requires_grad()) {
    throw std::logic_error("backward: loss does not depend on any tensor requiring grad");
  }
  Tape tape = Tape::record(loss);
  const auto& entries = tape.entries();
  for (Node* n : entries) {
    if (!n->leaf) n->grad.resize(0, 0);
  }
  entries.back()->accumulate(Matrix::Ones(1, 1));
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    Node* n = *it;
    if (n->leaf || !n->backward_fn || n->grad.size() == 0) continue;
    n->backward_fn(*n);
  }
}

namespace {

Node& in(Node& n, std::size_t i) { return *n.inputs[i]; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner extents differ " + shape_str(a.value()) + " x " + shape_str(b.value()));
  }
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad * y.value.transpose());
    if (y.requires_grad) y.accumulate(x.value.transpose() * n.grad);
  }, "matmul");
}

Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  return make_result(std::move(out), {a}, [](Node& n) { in(n, 0).accumulate(n.grad.transpose()); }, "transpose");
}

Tensor spmm(const SparseMatrix& s, const Tensor& b) {
  if (s.cols() != b.rows()) {
    throw DimensionError("spmm: inner extents differ [" + std::to_string(s.rows()) + "x" +
                         std::to_string(s.cols()) + "] x " + shape_str(b.value()));
  }
  Matrix out = s * b.value();
  // The sparse operand is captured by value; adjacency matrices are small.
  return make_result(std::move(out), {b}, [s](Node& n) { in(n, 0).accumulate(s.transpose() * n.grad); }, "spmm");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  return make_result(a.value() + b.value(), {a, b}, [](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
    if (in(n, 1).requires_grad) in(n, 1).accumulate(n.grad);
  }, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  return make_result(a.value() - b.value(), {a, b}, [](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
    if (in(n, 1).requires_grad) in(n, 1).accumulate(-n.grad);
  }, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Matrix out = a.value().cwiseProduct(b.value());
  return make_result(std::move(out), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad.cwiseProduct(y.value));
    if (y.requires_grad) y.accumulate(n.grad.cwiseProduct(x.value));
  }, "mul");
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " + shape_str(row.value()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {a, row}, [](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
    if (in(n, 1).requires_grad) in(n, 1).accumulate(n.grad.colwise().sum());
  }, "add_row");
}

Tensor scale(const Tensor& a, double factor) {
  return make_result(a.value() * factor, {a}, [factor](Node& n) { in(n, 0).accumulate(n.grad * factor); }, "scale");
}

Tensor relu(const Tensor& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_result(std::move(out), {a}, [](Node& n) {
    Node& x = in(n, 0);
    // Subgradient 0 at 0.
    x.accumulate(n.grad.cwiseProduct((x.value.array() > 0.0).cast<double>().matrix()));
  }, "relu");
}

namespace {

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Tensor sigmoid(const Tensor& a) {
  Matrix out = a.value().unaryExpr([](double z) { return stable_sigmoid(z); });
  return make_result(std::move(out), {a}, [](Node& n) {
    auto s = n.value.array();
    in(n, 0).accumulate((n.grad.array() * s * (1.0 - s)).matrix());
  }, "sigmoid");
}

Tensor exp(const Tensor& a) {
  Matrix out = a.value().array().exp().matrix();
  return make_result(std::move(out), {a}, [](Node& n) { in(n, 0).accumulate(n.grad.cwiseProduct(n.value)); }, "exp");
}

Tensor log1p(const Tensor& a) {
  if ((a.value().array() < -1.0).any()) throw DomainError("log1p: input < -1");
  Matrix out = a.value().unaryExpr([](double x) { return std::log1p(x); });
  return make_result(std::move(out), {a}, [](Node& n) {
    Node& x = in(n, 0);
    x.accumulate((n.grad.array() / (1.0 + x.value.array())).matrix());
  }, "log1p");
}

Tensor square(const Tensor& a) {
  Matrix out = a.value().array().square().matrix();
  return make_result(std::move(out), {a}, [](Node& n) {
    Node& x = in(n, 0);
    x.accumulate((2.0 * n.grad.array() * x.value.array()).matrix());
  }, "square");
}

Tensor sqrt(const Tensor& a) {
  if ((a.value().array() < 0.0).any()) throw DomainError("sqrt: negative input");
  Matrix out = a.value().array().sqrt().matrix();
  return make_result(std::move(out), {a}, [](Node& n) {
    in(n, 0).accumulate((n.grad.array() / (2.0 * n.value.array())).matrix());
  }, "sqrt");
}

Tensor sum(const Tensor& a) {
  return make_result(Matrix::Constant(1, 1, a.value().sum()), {a}, [](Node& n) {
    Node& x = in(n, 0);
    x.accumulate(Matrix::Constant(x.value.rows(), x.value.cols(), n.grad(0, 0)));
  }, "sum");
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(a.size());
  return make_result(Matrix::Constant(1, 1, a.value().sum() * inv), {a}, [inv](Node& n) {
    Node& x = in(n, 0);
    x.accumulate(Matrix::Constant(x.value.rows(), x.value.cols(), n.grad(0, 0) * inv));
  }, "mean");
}

Tensor row_sum(const Tensor& a) {
  Matrix out = a.value().rowwise().sum();
  return make_result(std::move(out), {a}, [](Node& n) {
    Node& x = in(n, 0);
    Matrix g = n.grad.col(0).replicate(1, x.value.cols());
    x.accumulate(g);
  }, "row_sum");
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row counts differ " + shape_str(a.value()) + " vs " + shape_str(b.value()));
  }
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Index split = a.cols();
  return make_result(std::move(out), {a, b}, [split](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad.leftCols(split));
    if (in(n, 1).requires_grad) in(n, 1).accumulate(n.grad.rightCols(n.grad.cols() - split));
  }, "concat_cols");
}

Tensor select_rows(const Tensor& a, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw DimensionError("select_rows: row index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return make_result(std::move(out), {a}, [idx = std::move(idx)](Node& n) {
    Node& x = in(n, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += n.grad.row(static_cast<Index>(i));
    x.accumulate(g);
  }, "select_rows");
}

Tensor gather(const Tensor& a, std::span<const Index> flat) {
  Matrix out(static_cast<Index>(flat.size()), 1);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (flat[i] < 0 || flat[i] >= a.size()) throw DimensionError("gather: index out of range");
    out(static_cast<Index>(i), 0) = a.value().data()[flat[i]];
  }
  std::vector<Index> idx(flat.begin(), flat.end());
  return make_result(std::move(out), {a}, [idx = std::move(idx)](Node& n) {
    Node& x = in(n, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.data()[idx[i]] += n.grad(static_cast<Index>(i), 0);
    x.accumulate(g);
  }, "gather");
}

Tensor bce_with_logits(const Tensor& logits, const Matrix& labels) {
  if (logits.size() == 0) throw DimensionError("bce_with_logits: empty input");
  if (labels.rows() != logits.rows() || labels.cols() != logits.cols()) {
    throw DimensionError("bce_with_logits: labels " + shape_str(labels) + " vs logits " + shape_str(logits.value()));
  }
  if (((labels.array() != 0.0) && (labels.array() != 1.0)).any()) {
    throw DomainError("bce_with_logits: labels must be 0 or 1");
  }
  const auto z = logits.value().array();
  const auto y = labels.array();
  const double n = static_cast<double>(logits.size());
  const double value =
      (z.max(0.0) - z * y + (-z.abs()).exp().unaryExpr([](double v) { return std::log1p(v); })).sum() / n;
  return make_result(Matrix::Constant(1, 1, value), {logits}, [labels, n](Node& n_) {
    Node& x = in(n_, 0);
    Matrix s = x.value.unaryExpr([](double v) { return stable_sigmoid(v); });
    x.accumulate(((s - labels) * (n_.grad(0, 0) / n)).eval());
  }, "bce_with_logits");
}

Tensor squared_error(const Tensor& a, const Tensor& b) {
  require_same_shape("squared_error", a, b);
  if (a.rows() == 0) throw DimensionError("squared_error: no rows");
  return scale(sum(square(sub(a, b))), 1.0 / static_cast<double>(a.rows()));
}

}  // namespace latmap::ad
