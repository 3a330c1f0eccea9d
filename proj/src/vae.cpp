#include "latmap/vae.hpp"

#include <algorithm>

#include "latmap/errors.hpp"

namespace latmap {

std::string to_string(LatentSource s) {
  switch (s) {
    case LatentSource::sc2000: return "sc2000";
    case LatentSource::sc500: return "sc500";
    case LatentSource::st_exp500: return "st_exp500";
    case LatentSource::st_exp_sp500: return "st_exp_sp500";
  }
  return "unknown";
}

nlohmann::ordered_json VaeArchitecture::to_json() const {
  nlohmann::ordered_json j;
  j["input_dim"] = input_dim;
  j["encoder_hidden"] = encoder_hidden;
  j["latent_dim"] = latent_dim;
  j["decoder_hidden"] = decoder_hidden;
  return j;
}

VaeArchitecture VaeArchitecture::from_json(const nlohmann::ordered_json& j) {
  VaeArchitecture a;
  a.input_dim = j.at("input_dim").get<Index>();
  a.encoder_hidden = j.at("encoder_hidden").get<std::vector<Index>>();
  a.latent_dim = j.at("latent_dim").get<Index>();
  a.decoder_hidden = j.at("decoder_hidden").get<std::vector<Index>>();
  return a;
}

ad::Tensor reparameterize(const ad::Tensor& mu, const ad::Tensor& logvar, const Matrix& noise) {
  if (noise.rows() != mu.rows() || noise.cols() != mu.cols()) {
    throw DimensionError("reparameterize: noise shape does not match mu");
  }
  return ad::add(mu, ad::mul(ad::exp(ad::scale(logvar, 0.5)), ad::Tensor(noise)));
}

ad::Tensor kl_divergence(const ad::Tensor& mu, const ad::Tensor& logvar) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) {
    throw DimensionError("kl_divergence: mu and logvar shapes differ");
  }
  // 0.5 * (mu^2 + exp(lv) - 1 - lv), summed over entries, averaged over rows.
  const ad::Tensor per_entry = ad::sub(ad::add(ad::square(mu), ad::exp(logvar)), logvar);
  const double rows = static_cast<double>(mu.rows());
  return ad::scale(ad::sub(ad::sum(per_entry), ad::Tensor::scalar(static_cast<double>(mu.size()))), 0.5 / rows);
}

Vae::Vae(VaeArchitecture arch, Rng& rng, std::string name) : arch_(std::move(arch)), name_(std::move(name)) {
  if (arch_.input_dim <= 0 || arch_.latent_dim <= 0) throw std::invalid_argument("Vae: dimensions must be positive");
  Index width = arch_.input_dim;
  if (!arch_.encoder_hidden.empty()) {
    std::vector<Index> widths{arch_.input_dim};
    widths.insert(widths.end(), arch_.encoder_hidden.begin(), arch_.encoder_hidden.end());
    trunk_ = Mlp(widths, rng, name_ + ".encoder");
    width = arch_.encoder_hidden.back();
  }
  mu_head_ = Linear(width, arch_.latent_dim, rng, name_ + ".mu");
  logvar_head_ = Linear(width, arch_.latent_dim, rng, name_ + ".logvar");
  std::vector<Index> dec{arch_.latent_dim};
  dec.insert(dec.end(), arch_.decoder_hidden.begin(), arch_.decoder_hidden.end());
  dec.push_back(arch_.input_dim);
  decoder_ = Mlp(dec, rng, name_ + ".decoder");
}

Encoding Vae::encode(const ad::Tensor& x) const {
  require_width("Vae::encode", x, arch_.input_dim);
  ad::Tensor h = x;
  if (!arch_.encoder_hidden.empty()) h = ad::relu(trunk_(x));
  return {mu_head_(h), logvar_head_(h)};
}

ad::Tensor Vae::decode(const ad::Tensor& z) const {
  require_width("Vae::decode", z, arch_.latent_dim);
  return decoder_(z);
}

VaeLoss Vae::loss(const ad::Tensor& x, const Matrix& noise, double beta) const {
  return loss(encode(x), x, noise, beta);
}

VaeLoss Vae::loss(const Encoding& enc, const ad::Tensor& x, const Matrix& noise, double beta) const {
  const ad::Tensor z = reparameterize(enc.mu, enc.logvar, noise);
  const ad::Tensor recon = ad::squared_error(decode(z), x);
  const ad::Tensor kl = kl_divergence(enc.mu, enc.logvar);
  ad::Tensor total = beta == 0.0 ? recon : ad::add(recon, ad::scale(kl, beta));
  return {total, recon, kl};
}

Matrix Vae::encode_mean(const Matrix& x) const {
  ad::NoGradGuard guard;
  if (x.rows() == 0) return Matrix(0, arch_.latent_dim);
  return encode(ad::Tensor(x)).mu.value();
}

std::vector<ad::Tensor> Vae::parameters() const {
  std::vector<ad::Tensor> out;
  if (!arch_.encoder_hidden.empty()) trunk_.collect(out);
  mu_head_.collect(out);
  logvar_head_.collect(out);
  decoder_.collect(out);
  return out;
}

Checkpoint Vae::to_checkpoint() const {
  auto cfg = arch_.to_json();
  cfg["name"] = name_;
  return Checkpoint::from_parameters("vae", std::move(cfg), parameters());
}

Vae Vae::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.arch != "vae") throw DataError("checkpoint holds '" + ckpt.arch + "', expected 'vae'");
  Rng scratch(0);
  Vae v(VaeArchitecture::from_json(ckpt.config), scratch, ckpt.config.at("name").get<std::string>());
  auto params = v.parameters();
  ckpt.restore(params);
  return v;
}

Vae Vae::clone(std::string name) const {
  Rng scratch(0);
  Vae v(arch_, scratch, name.empty() ? name_ : std::move(name));
  auto dst = v.parameters();
  const auto src = parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i].mutable_value() = src[i].value();
  return v;
}

Matrix gather_rows(const Matrix& x, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
  return out;
}

EpochLosses run_vae_epoch(const Vae& vae, Adam& opt, const Matrix& x, Index batch_size, double beta, Rng& rng,
                          const ExtraLoss& extra) {
  if (x.rows() == 0) throw DataError("run_vae_epoch: empty data");
  const Index n = x.rows();
  const Index bs = batch_size <= 0 ? n : std::min(batch_size, n);
  const auto order = rng.permutation(n);
  EpochLosses acc;
  for (Index start = 0; start < n; start += bs) {
    const Index len = std::min(bs, n - start);
    std::span<const Index> rows(order.data() + start, static_cast<std::size_t>(len));
    const ad::Tensor xb(gather_rows(x, rows));
    const Matrix noise = rng.normal_matrix(len, vae.architecture().latent_dim);
    const Encoding enc = vae.encode(xb);
    VaeLoss l = vae.loss(enc, xb, noise, beta);
    ad::Tensor total = l.total;
    if (extra) {
      const ad::Tensor e = extra(enc, rows);
      total = ad::add(total, e);
      acc.extra += e.item();
    }
    opt.zero_grad();
    ad::backward(total);
    opt.step();
    acc.total += total.item();
    acc.recon += l.recon.item();
    acc.kl += l.kl.item();
    ++acc.steps;
  }
  const double s = static_cast<double>(acc.steps);
  acc.total /= s;
  acc.recon /= s;
  acc.kl /= s;
  acc.extra /= s;
  return acc;
}

}  // namespace latmap
