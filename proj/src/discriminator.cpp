#include "latmap/discriminator.hpp"

#include "latmap/errors.hpp"

namespace latmap {

namespace {

std::vector<Index> widths(Index d, Index width, Index layers) {
  std::vector<Index> w{d};
  for (Index i = 0; i < layers; ++i) w.push_back(width);
  w.push_back(1);
  return w;
}

Matrix stack(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("discriminator: sc and st codes have different widths");
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

Matrix labels_for(Index n_sc, Index n_st) {
  Matrix y(n_sc + n_st, 1);
  y.topRows(n_sc).setConstant(kScLabel);
  y.bottomRows(n_st).setConstant(kStLabel);
  return y;
}

}  // namespace

Discriminator::Discriminator(Index latent_dim, Rng& rng, Index hidden_width, Index hidden_layers, std::string name)
    : net_(widths(latent_dim, hidden_width, hidden_layers), rng, name),
      hidden_width_(hidden_width),
      hidden_layers_(hidden_layers),
      name_(std::move(name)) {}

ad::Tensor Discriminator::forward(const ad::Tensor& z) const {
  require_width("Discriminator::forward", z, latent_dim());
  return net_(z);
}

Vector Discriminator::logits(const Matrix& z) const {
  ad::NoGradGuard guard;
  if (z.rows() == 0) return Vector(0);
  return forward(ad::Tensor(z)).value().col(0);
}

std::vector<ad::Tensor> Discriminator::parameters() const {
  std::vector<ad::Tensor> out;
  net_.collect(out);
  return out;
}

Checkpoint Discriminator::to_checkpoint() const {
  nlohmann::ordered_json cfg;
  cfg["latent_dim"] = latent_dim();
  cfg["hidden_width"] = hidden_width_;
  cfg["hidden_layers"] = hidden_layers_;
  cfg["name"] = name_;
  return Checkpoint::from_parameters("discriminator", std::move(cfg), parameters());
}

Discriminator Discriminator::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.arch != "discriminator") throw DataError("checkpoint holds '" + ckpt.arch + "', expected 'discriminator'");
  Rng scratch(0);
  Discriminator d(ckpt.config.at("latent_dim").get<Index>(), scratch, ckpt.config.at("hidden_width").get<Index>(),
                  ckpt.config.at("hidden_layers").get<Index>(), ckpt.config.at("name").get<std::string>());
  auto params = d.parameters();
  ckpt.restore(params);
  return d;
}

double disc_accuracy(const Discriminator& d, const Matrix& z_sc, const Matrix& z_st) {
  if (z_sc.rows() == 0 || z_st.rows() == 0) throw DataError("disc_accuracy: both code sets must be nonempty");
  const Vector a = d.logits(z_sc);
  const Vector b = d.logits(z_st);
  const auto correct = (a.array() > 0.0).count() + (b.array() <= 0.0).count();
  return static_cast<double>(correct) / static_cast<double>(a.size() + b.size());
}

ad::Tensor discriminator_loss(const Discriminator& d, const Matrix& z_sc, const Matrix& z_st) {
  return ad::bce_with_logits(d.forward(ad::Tensor(stack(z_sc, z_st))), labels_for(z_sc.rows(), z_st.rows()));
}

DiscTrainResult train_discriminator(const Discriminator& d, Adam& opt, const Matrix& z_sc, const Matrix& z_st,
                                    double alpha, Index max_iters) {
  DiscTrainResult r;
  r.accuracy = disc_accuracy(d, z_sc, z_st);
  const Matrix z = stack(z_sc, z_st);
  const Matrix y = labels_for(z_sc.rows(), z_st.rows());
  const ad::Tensor zt(z);
  while (r.accuracy < alpha && r.steps < max_iters) {
    opt.zero_grad();
    ad::backward(ad::bce_with_logits(d.forward(zt), y));
    opt.step();
    ++r.steps;
    r.accuracy = disc_accuracy(d, z_sc, z_st);
  }
  opt.zero_grad();
  return r;
}

ad::Tensor adversarial_generator_loss(const Discriminator& d, const ad::Tensor& z, double target_label) {
  return ad::bce_with_logits(d.forward(z), Matrix::Constant(z.rows(), 1, target_label));
}

}  // namespace latmap
