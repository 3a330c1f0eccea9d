#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "latmap/graph.hpp"
#include "latmap/vae.hpp"

namespace latmap {

struct VgaeArchitecture {
  Index input_dim = 0;
  Index latent_dim = 10;  // even; split into expression and graph halves before the merge
  std::vector<Index> expr_hidden{128, 64};
  Index gcn_hidden = 64;
  std::vector<Index> decoder_hidden{64, 128};
  std::vector<Index> coord_hidden{32};

  Index half() const { return latent_dim / 2; }
  nlohmann::ordered_json to_json() const;
  static VgaeArchitecture from_json(const nlohmann::ordered_json& j);
};

/// Intermediate encoder outputs, mostly for inspection.
struct VgaeEncoding {
  ad::Tensor expr_part;   // n x d/2
  ad::Tensor graph_part;  // n x d/2
  ad::Tensor merged;      // n x d
  Encoding posterior;     // heads on `merged`
};

struct VgaeDecoded {
  ad::Tensor expression;  // n x genes
  ad::Tensor coords;      // n x 2, model frame
  ad::Tensor adj_logits;  // n x n, z z^T
};

struct VgaeLossWeights {
  double recon_exp = 1.0;
  double recon_sp = 1.0;
  double recon_adj = 1.0;
  double beta_kl = 1.0;
};

struct VgaeLossTerms {
  ad::Tensor total;
  ad::Tensor recon_exp;
  ad::Tensor recon_sp;
  ad::Tensor recon_adj;
  ad::Tensor kl;
  Encoding posterior;
};

/// Entries of A + I used by the edge-reconstruction loss: every positive plus
/// an equal number of sampled zero entries. `flat` indexes a row-major n x n matrix.
struct AdjacencyTargets {
  std::vector<Index> flat;
  Matrix labels;  // column of 0/1
};

AdjacencyTargets sample_adjacency_targets(const SpatialGraph& g, Rng& rng);

/**
 * Variational graph autoencoder with a merged latent: an MLP over expression
 * and a two-layer GCN over the spot graph each produce d/2 features, a linear
 * layer merges their concatenation to d, and linear heads give mu/logvar.
 * Decoders reconstruct expression, model-frame coordinates, and the adjacency
 * through inner products.
 */
class Vgae {
 public:
  Vgae(VgaeArchitecture arch, Rng& rng, std::string name = "vgae");

  const VgaeArchitecture& architecture() const { return arch_; }

  VgaeEncoding encode_parts(const SparseMatrix& a_hat, const ad::Tensor& x) const;
  Encoding encode(const SparseMatrix& a_hat, const ad::Tensor& x) const { return encode_parts(a_hat, x).posterior; }

  ad::Tensor decode_expression(const ad::Tensor& z) const;
  ad::Tensor decode_coords(const ad::Tensor& z) const;
  VgaeDecoded decode(const ad::Tensor& z) const;

  /// `coords` must already be in the model frame.
  VgaeLossTerms loss(const SparseMatrix& a_hat, const Matrix& x, const Matrix& coords, const AdjacencyTargets& adj,
                     const Matrix& noise, const VgaeLossWeights& w) const;

  Matrix encode_mean(const SparseMatrix& a_hat, const Matrix& x) const;

  std::vector<ad::Tensor> parameters() const;
  /// GCN weights (no bias), in layer order.
  std::vector<ad::Tensor>& gcn_weights() { return gcn_; }

  Checkpoint to_checkpoint(nlohmann::ordered_json extra = nlohmann::ordered_json::object()) const;
  static Vgae from_checkpoint(const Checkpoint& ckpt);

 private:
  VgaeArchitecture arch_;
  std::string name_;
  Mlp expr_encoder_;
  std::vector<ad::Tensor> gcn_;
  Linear merge_;
  Linear mu_head_;
  Linear logvar_head_;
  Mlp expr_decoder_;
  Mlp coord_decoder_;
};

}  // namespace latmap
