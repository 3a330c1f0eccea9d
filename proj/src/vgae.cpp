#include "latmap/vgae.hpp"

#include <cmath>
#include <unordered_set>

namespace latmap {

nlohmann::ordered_json VgaeArchitecture::to_json() const {
  nlohmann::ordered_json j;
  j["input_dim"] = input_dim;
  j["latent_dim"] = latent_dim;
  j["expr_hidden"] = expr_hidden;
  j["gcn_hidden"] = gcn_hidden;
  j["decoder_hidden"] = decoder_hidden;
  j["coord_hidden"] = coord_hidden;
  return j;
}

VgaeArchitecture VgaeArchitecture::from_json(const nlohmann::ordered_json& j) {
  VgaeArchitecture a;
  a.input_dim = j.at("input_dim").get<Index>();
  a.latent_dim = j.at("latent_dim").get<Index>();
  a.expr_hidden = j.at("expr_hidden").get<std::vector<Index>>();
  a.gcn_hidden = j.at("gcn_hidden").get<Index>();
  a.decoder_hidden = j.at("decoder_hidden").get<std::vector<Index>>();
  a.coord_hidden = j.at("coord_hidden").get<std::vector<Index>>();
  return a;
}

AdjacencyTargets sample_adjacency_targets(const SpatialGraph& g, Rng& rng) {
  const Index n = g.n;
  AdjacencyTargets t;
  std::unordered_set<Index> positive;
  for (Index i = 0; i < n; ++i) positive.insert(i * n + i);
  for (const auto& [i, j] : g.edges) {
    positive.insert(i * n + j);
    positive.insert(j * n + i);
  }
  std::vector<Index> pos(positive.begin(), positive.end());
  std::sort(pos.begin(), pos.end());
  const Index n_zero = n * n - static_cast<Index>(pos.size());
  std::vector<Index> neg;
  if (n_zero <= static_cast<Index>(pos.size())) {
    for (Index f = 0; f < n * n; ++f) {
      if (!positive.count(f)) neg.push_back(f);
    }
  } else {
    std::unordered_set<Index> chosen;
    while (neg.size() < pos.size()) {
      const Index f = rng.uniform_int(0, n * n - 1);
      if (!positive.count(f) && chosen.insert(f).second) neg.push_back(f);
    }
  }
  t.flat = pos;
  t.flat.insert(t.flat.end(), neg.begin(), neg.end());
  t.labels = Matrix::Zero(static_cast<Index>(t.flat.size()), 1);
  t.labels.topRows(static_cast<Index>(pos.size())).setOnes();
  return t;
}

Vgae::Vgae(VgaeArchitecture arch, Rng& rng, std::string name) : arch_(std::move(arch)), name_(std::move(name)) {
  if (arch_.latent_dim <= 0 || arch_.latent_dim % 2 != 0) {
    throw std::invalid_argument("Vgae: latent_dim must be positive and even");
  }
  const Index h = arch_.half();
  std::vector<Index> ew{arch_.input_dim};
  ew.insert(ew.end(), arch_.expr_hidden.begin(), arch_.expr_hidden.end());
  ew.push_back(h);
  expr_encoder_ = Mlp(ew, rng, name_ + ".expr_encoder");

  auto glorot = [&](Index in, Index out, const std::string& n) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(in, out);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
    return ad::Tensor::parameter(std::move(w), n);
  };
  gcn_.push_back(glorot(arch_.input_dim, arch_.gcn_hidden, name_ + ".gcn.0.weight"));
  gcn_.push_back(glorot(arch_.gcn_hidden, h, name_ + ".gcn.1.weight"));

  merge_ = Linear(2 * h, arch_.latent_dim, rng, name_ + ".merge");
  mu_head_ = Linear(arch_.latent_dim, arch_.latent_dim, rng, name_ + ".mu");
  logvar_head_ = Linear(arch_.latent_dim, arch_.latent_dim, rng, name_ + ".logvar");

  std::vector<Index> dw{arch_.latent_dim};
  dw.insert(dw.end(), arch_.decoder_hidden.begin(), arch_.decoder_hidden.end());
  dw.push_back(arch_.input_dim);
  expr_decoder_ = Mlp(dw, rng, name_ + ".expr_decoder");

  std::vector<Index> cw{arch_.latent_dim};
  cw.insert(cw.end(), arch_.coord_hidden.begin(), arch_.coord_hidden.end());
  cw.push_back(2);
  coord_decoder_ = Mlp(cw, rng, name_ + ".coord_decoder");
}

VgaeEncoding Vgae::encode_parts(const SparseMatrix& a_hat, const ad::Tensor& x) const {
  require_width("Vgae::encode", x, arch_.input_dim);
  if (a_hat.rows() != x.rows() || a_hat.cols() != x.rows()) {
    throw DimensionError("Vgae::encode: adjacency is " + std::to_string(a_hat.rows()) + "x" +
                         std::to_string(a_hat.cols()) + " for " + std::to_string(x.rows()) + " spots");
  }
  VgaeEncoding e;
  e.expr_part = expr_encoder_(x);
  const ad::Tensor h1 = gcn_layer(a_hat, x, gcn_[0], true);
  e.graph_part = gcn_layer(a_hat, h1, gcn_[1], false);
  e.merged = merge_(ad::concat_cols(e.expr_part, e.graph_part));
  e.posterior = {mu_head_(e.merged), logvar_head_(e.merged)};
  return e;
}

ad::Tensor Vgae::decode_expression(const ad::Tensor& z) const {
  require_width("Vgae::decode", z, arch_.latent_dim);
  return expr_decoder_(z);
}

ad::Tensor Vgae::decode_coords(const ad::Tensor& z) const {
  require_width("Vgae::decode", z, arch_.latent_dim);
  return coord_decoder_(z);
}

VgaeDecoded Vgae::decode(const ad::Tensor& z) const {
  return {decode_expression(z), decode_coords(z), ad::matmul(z, ad::transpose(z))};
}

VgaeLossTerms Vgae::loss(const SparseMatrix& a_hat, const Matrix& x, const Matrix& coords,
                         const AdjacencyTargets& adj, const Matrix& noise, const VgaeLossWeights& w) const {
  if (coords.rows() != x.rows() || coords.cols() != 2) throw DimensionError("Vgae::loss: coordinates must be n x 2");
  const ad::Tensor xt(x);
  VgaeLossTerms t;
  t.posterior = encode(a_hat, xt);
  const ad::Tensor z = reparameterize(t.posterior.mu, t.posterior.logvar, noise);
  t.recon_exp = ad::squared_error(decode_expression(z), xt);
  t.recon_sp = ad::squared_error(decode_coords(z), ad::Tensor(coords));
  t.recon_adj = ad::bce_with_logits(ad::gather(ad::matmul(z, ad::transpose(z)), adj.flat), adj.labels);
  t.kl = kl_divergence(t.posterior.mu, t.posterior.logvar);
  t.total = ad::add(ad::add(ad::scale(t.recon_exp, w.recon_exp), ad::scale(t.recon_sp, w.recon_sp)),
                    ad::add(ad::scale(t.recon_adj, w.recon_adj), ad::scale(t.kl, w.beta_kl)));
  return t;
}

Matrix Vgae::encode_mean(const SparseMatrix& a_hat, const Matrix& x) const {
  ad::NoGradGuard guard;
  return encode(a_hat, ad::Tensor(x)).mu.value();
}

std::vector<ad::Tensor> Vgae::parameters() const {
  std::vector<ad::Tensor> out;
  expr_encoder_.collect(out);
  out.insert(out.end(), gcn_.begin(), gcn_.end());
  merge_.collect(out);
  mu_head_.collect(out);
  logvar_head_.collect(out);
  expr_decoder_.collect(out);
  coord_decoder_.collect(out);
  return out;
}

Checkpoint Vgae::to_checkpoint(nlohmann::ordered_json extra) const {
  auto cfg = arch_.to_json();
  cfg["name"] = name_;
  for (auto it = extra.begin(); it != extra.end(); ++it) cfg[it.key()] = it.value();
  return Checkpoint::from_parameters("vgae", std::move(cfg), parameters());
}

Vgae Vgae::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.arch != "vgae") throw DataError("checkpoint holds '" + ckpt.arch + "', expected 'vgae'");
  Rng scratch(0);
  Vgae v(VgaeArchitecture::from_json(ckpt.config), scratch, ckpt.config.at("name").get<std::string>());
  auto params = v.parameters();
  ckpt.restore(params);
  return v;
}

}  // namespace latmap
