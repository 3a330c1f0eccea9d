#include "latmap/layers.hpp"

#include <cmath>

#include "latmap/errors.hpp"

namespace latmap {

Linear::Linear(Index in, Index out, Rng& rng, const std::string& name) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Matrix w(in, out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  Matrix b(1, out);
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-bound, bound);
  weight = ad::Tensor::parameter(std::move(w), name + ".weight");
  bias = ad::Tensor::parameter(std::move(b), name + ".bias");
}

ad::Tensor Linear::operator()(const ad::Tensor& x) const {
  return ad::add_row(ad::matmul(x, weight), bias);
}

void Linear::collect(std::vector<ad::Tensor>& out) const {
  out.push_back(weight);
  out.push_back(bias);
}

Mlp::Mlp(const std::vector<Index>& widths, Rng& rng, const std::string& name) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers_.emplace_back(widths[i], widths[i + 1], rng, name + "." + std::to_string(i));
  }
}

ad::Tensor Mlp::operator()(const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size()) h = ad::relu(h);
  }
  return h;
}

void Mlp::collect(std::vector<ad::Tensor>& out) const {
  for (const auto& l : layers_) l.collect(out);
}

void require_width(const char* where, const ad::Tensor& x, Index expected) {
  if (x.cols() != expected) {
    throw DimensionError(std::string(where) + ": expected " + std::to_string(expected) + " columns, got " +
                         std::to_string(x.cols()));
  }
}

}  // namespace latmap
