#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latmap/checkpoint.hpp"
#include "latmap/layers.hpp"
#include "latmap/optim.hpp"

namespace latmap {

/// Which dataset a latent matrix encodes.
enum class LatentSource { sc2000, sc500, st_exp500, st_exp_sp500 };

std::string to_string(LatentSource s);

/// Rows of d-dimensional codes; row i belongs to row i of the source dataset.
/// Once `fixed`, the codes are a training target and must not change.
struct LatentMatrix {
  Matrix codes;
  LatentSource source = LatentSource::sc2000;
  bool fixed = false;

  Index dim() const { return codes.cols(); }
};

struct VaeArchitecture {
  Index input_dim = 0;
  std::vector<Index> encoder_hidden{128, 64};
  Index latent_dim = 10;
  std::vector<Index> decoder_hidden{64, 128};

  nlohmann::ordered_json to_json() const;
  static VaeArchitecture from_json(const nlohmann::ordered_json& j);
};

struct Encoding {
  ad::Tensor mu;
  ad::Tensor logvar;
};

struct VaeLoss {
  ad::Tensor total;
  ad::Tensor recon;
  ad::Tensor kl;
};

/// z = mu + exp(logvar / 2) * noise.
ad::Tensor reparameterize(const ad::Tensor& mu, const ad::Tensor& logvar, const Matrix& noise);

/// KL(N(mu, exp(logvar)) || N(0, I)): per row 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar), averaged over rows.
ad::Tensor kl_divergence(const ad::Tensor& mu, const ad::Tensor& logvar);

/**
 * Gaussian-latent autoencoder: ReLU MLP trunk, linear mu/logvar heads, ReLU MLP
 * decoder with a linear output in the input space.
 */
class Vae {
 public:
  Vae(VaeArchitecture arch, Rng& rng, std::string name = "vae");

  const VaeArchitecture& architecture() const { return arch_; }
  const std::string& name() const { return name_; }

  Encoding encode(const ad::Tensor& x) const;
  ad::Tensor decode(const ad::Tensor& z) const;

  /// recon = squared_error(x, decode(z)); total = recon + beta * kl.
  VaeLoss loss(const ad::Tensor& x, const Matrix& noise, double beta = 1.0) const;
  VaeLoss loss(const Encoding& enc, const ad::Tensor& x, const Matrix& noise, double beta) const;

  /// Noise-free codes (the posterior means), evaluated without recording a graph.
  Matrix encode_mean(const Matrix& x) const;

  std::vector<ad::Tensor> parameters() const;

  Checkpoint to_checkpoint() const;
  static Vae from_checkpoint(const Checkpoint& ckpt);
  /// Independent copy of the parameters, optionally under another name.
  Vae clone(std::string name = {}) const;

 private:
  Vae() = default;
  VaeArchitecture arch_;
  std::string name_;
  Mlp trunk_;  // empty when encoder_hidden is empty
  Linear mu_head_;
  Linear logvar_head_;
  Mlp decoder_;
};

struct EpochLosses {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double extra = 0.0;
  Index steps = 0;
};

/// Additional loss for one minibatch given its encoding and row indices.
using ExtraLoss = std::function<ad::Tensor(const Encoding& enc, std::span<const Index> rows)>;

/**
 * One pass over `x` in shuffled minibatches with an Adam step per batch.
 * Returns batch-averaged loss terms.
 */
EpochLosses run_vae_epoch(const Vae& vae, Adam& opt, const Matrix& x, Index batch_size, double beta, Rng& rng,
                          const ExtraLoss& extra = {});

/// Rows of `x` at `rows`.
Matrix gather_rows(const Matrix& x, std::span<const Index> rows);

}  // namespace latmap
