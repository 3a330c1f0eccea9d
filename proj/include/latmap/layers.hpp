#pragma once

#include <string>
#include <vector>

#include "latmap/autodiff.hpp"
#include "latmap/random.hpp"

namespace latmap {

/// y = x W + b with W stored [in x out] and b [1 x out].
struct Linear {
  ad::Tensor weight;
  ad::Tensor bias;

  Linear() = default;
  /// Weights and bias drawn from U(-1/sqrt(in), 1/sqrt(in)).
  Linear(Index in, Index out, Rng& rng, const std::string& name);

  ad::Tensor operator()(const ad::Tensor& x) const;
  Index in_features() const { return weight.rows(); }
  Index out_features() const { return weight.cols(); }
  void collect(std::vector<ad::Tensor>& out) const;
};

/// Stack of linear layers with ReLU between them; the last layer is linear.
class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}.
  Mlp(const std::vector<Index>& widths, Rng& rng, const std::string& name);

  ad::Tensor operator()(const ad::Tensor& x) const;

  Index in_features() const { return layers_.front().in_features(); }
  Index out_features() const { return layers_.back().out_features(); }
  const std::vector<Linear>& layers() const { return layers_; }
  std::vector<Linear>& layers() { return layers_; }
  void collect(std::vector<ad::Tensor>& out) const;

 private:
  std::vector<Linear> layers_;
};

/// Throws DimensionError if x does not have `expected` columns.
void require_width(const char* where, const ad::Tensor& x, Index expected);

}  // namespace latmap
