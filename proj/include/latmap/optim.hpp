#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "latmap/autodiff.hpp"

namespace latmap {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moments per parameter plus the shared step counter.
struct AdamState {
  AdamOptions options;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t t = 0;
};

/**
 * One bias-corrected Adam update on every parameter, using the gradients
 * currently stored on the tensors (a parameter without a gradient is treated as
 * having a zero gradient). Throws `NumericError` naming the first parameter
 * whose gradient contains NaN/Inf; parameters are left untouched in that case.
 */
void adam_step(std::span<ad::Tensor> params, AdamState& state);

/// Owns the parameter list and the Adam state for one model.
class Adam {
 public:
  Adam(std::vector<ad::Tensor> params, AdamOptions options = {});

  void zero_grad();
  void step() { adam_step(params_, state_); }

  const AdamState& state() const { return state_; }
  const std::vector<ad::Tensor>& params() const { return params_; }

 private:
  std::vector<ad::Tensor> params_;
  AdamState state_;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  Index entries_checked = 0;
};

/**
 * Compares reverse-mode gradients of `loss_fn` against central differences for
 * every entry of every parameter. The relative error of one entry is
 * |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
 */
GradCheckResult grad_check(const std::function<ad::Tensor()>& loss_fn, std::span<ad::Tensor> params,
                           double h = 1e-5);

}  // namespace latmap
