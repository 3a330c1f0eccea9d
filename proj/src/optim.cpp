#include "latmap/optim.hpp"

#include <algorithm>
#include <cmath>

#include "latmap/errors.hpp"

namespace latmap {

void adam_step(std::span<ad::Tensor> params, AdamState& state) {
  if (state.m.empty()) {
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const auto& p : params) {
      state.m.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.v.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("adam_step: state tracks " + std::to_string(state.m.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (state.m[i].rows() != p.rows() || state.m[i].cols() != p.cols()) {
      throw DimensionError("adam_step: moment shape mismatch for parameter '" + p.name() + "'");
    }
    if (p.has_grad() && !p.grad().allFinite()) {
      throw NumericError("adam_step: non-finite gradient in parameter '" + p.name() + "'");
    }
  }

  state.t += 1;
  const auto& o = state.options;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    if (p.has_grad()) {
      const auto g = p.grad().array();
      m = o.beta1 * m + (1.0 - o.beta1) * g;
      v = o.beta2 * v + (1.0 - o.beta2) * g.square();
    } else {
      m *= o.beta1;
      v *= o.beta2;
    }
    p.mutable_value().array() -= o.lr * (m / bc1) / ((v / bc2).sqrt() + o.epsilon);
  }
}

Adam::Adam(std::vector<ad::Tensor> params, AdamOptions options) : params_(std::move(params)) {
  state_.options = options;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

GradCheckResult grad_check(const std::function<ad::Tensor()>& loss_fn, std::span<ad::Tensor> params, double h) {
  for (auto& p : params) p.zero_grad();
  ad::backward(loss_fn());

  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    analytic.push_back(p.has_grad() ? p.grad() : Matrix::Zero(p.rows(), p.cols()));
  }

  GradCheckResult result;
  ad::NoGradGuard no_grad;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    Matrix& w = p.mutable_value();
    for (Index k = 0; k < w.size(); ++k) {
      const double orig = w.data()[k];
      w.data()[k] = orig + h;
      const double up = loss_fn().item();
      w.data()[k] = orig - h;
      const double down = loss_fn().item();
      w.data()[k] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i].data()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = p.name();
        result.worst_index = k;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  for (auto& p : params) p.zero_grad();
  return result;
}

}  // namespace latmap
