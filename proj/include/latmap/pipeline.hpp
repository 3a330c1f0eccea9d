#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "latmap/count_matrix.hpp"
#include "latmap/discriminator.hpp"
#include "latmap/graph.hpp"
#include "latmap/vae.hpp"
#include "latmap/vgae.hpp"

namespace latmap {

/**
 * Every knob of the three training stages. Keys in the JSON form match the
 * field names.
 */
struct TrainConfig {
  Index s1_epochs = 500;
  Index s2_epochs = 30;
  Index s2b_epochs = 10;
  Index s3_epochs = 300;
  /// Epochs of f_vae2 on its L1 and reconstruction terms before the adversarial loop.
  Index s2_warmup_epochs = 150;
  double alpha = 0.9;
  Index T = 50;
  Index latent_dim = 10;
  double lambda_l1 = 10.0;
  double lambda_l2 = 10.0;
  double lambda_l3 = 50.0;
  double lambda_recon_exp = 1.0;
  double lambda_recon_sp = 10.0;
  double lambda_recon_adj = 1.0;
  double beta_kl = 1.0;
  double lr = 1e-3;
  double lr_vgae = 1e-3;
  /// Learning rate of f_vae3 once the adversarial loop starts.
  double lr_st = 1e-4;
  std::uint64_t seed = 42;
  Index batch_size = 128;
  Index graph_k = 6;
  /// Mean squared distance for L1/L3; false gives the mean plain distance.
  bool squared_latent_loss = true;
  /// Keep the adversarial term off the sc-side model (only the st side moves).
  bool freeze_sc_adversarial = true;
  /// Start the st-side model as a copy of the warmed-up sc-side one.
  bool shared_st_init = true;

  /// Throws std::invalid_argument on epochs < 1, negative weights, or odd latent_dim.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::ordered_json& j);
  /// `key=value` override; the value is parsed as JSON.
  void set(const std::string& assignment);
  friend bool operator==(const TrainConfig& a, const TrainConfig& b) { return a.to_json() == b.to_json(); }
};

/// Paired-row latent distance: mean over rows of ||za_i - zb_i||^2, or of
/// ||za_i - zb_i|| when `squared` is false.
ad::Tensor euclidean_latent_loss(const ad::Tensor& za, const ad::Tensor& zb, bool squared = true);

/// Per-stage loss log: one row per step, first column the step number.
struct HistoryTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  double at(std::size_t row, const std::string& column) const;
  double first(const std::string& column) const { return at(0, column); }
  double last(const std::string& column) const { return at(rows.size() - 1, column); }
  void write_csv(const std::filesystem::path& path) const;
};

struct Stage1Result {
  Vae vae1;
  LatentMatrix z_sc2000;
  HistoryTable history;
};

/// Trains f_vae1 on the 2000-gene sc matrix and fixes its noise-free codes.
Stage1Result stage1(const TrainConfig& cfg, const Matrix& x_sc2000);

struct Stage2Result {
  Vae vae2;
  Vae vae3;
  Discriminator disc;
  LatentMatrix z_sc500;
  LatentMatrix z_st_exp500;
  HistoryTable history;
};

/**
 * Warms up f_vae2, then alternates discriminator training with the two
 * 500-gene VAEs for s2_epochs outer epochs of s2b_epochs inner epochs each,
 * then fixes both codes.
 * `z_sc2000` must be fixed and have one row per row of `x_sc500`.
 */
Stage2Result stage2(const TrainConfig& cfg, const Matrix& x_sc500, const Matrix& x_st500,
                    const LatentMatrix& z_sc2000);

/**
 * Separability of two fixed code sets. Each set is split in half by a seeded
 * permutation; a new discriminator is trained on the first halves (full batch,
 * until `alpha` or `T` steps) and scored on the held-out halves. Training
 * accuracy alone is useless here: the network memorizes a few thousand points
 * even when both sets share one distribution.
 */
double fresh_discriminator_accuracy(const Matrix& z_sc, const Matrix& z_st, std::uint64_t seed, double alpha = 0.99,
                                    Index T = 500, double lr = 1e-3);

struct Stage3Result {
  Vgae vgae;
  CoordinateTransform transform;
  LatentMatrix z_st_exp_sp;
  HistoryTable history;
};

/// Trains the VGAE over the spot kNN graph tied to the fixed st codes.
Stage3Result stage3(const TrainConfig& cfg, const Matrix& x_st500, const Matrix& coords,
                    const LatentMatrix& z_st_exp500);

struct Inference {
  Matrix expression;    // m x panel
  Matrix coords_model;  // m x 2, normalized frame
  Matrix coords;        // m x 2, tissue frame
};

/// f_vae2 encoder means, identity latent maps, then the VGAE decoders.
Inference infer(const Vae& vae2, const Vgae& vgae, const CoordinateTransform& transform, const Matrix& x_new);

/**
 * Counts with columns in `panel` order. Throws DataError listing missing genes,
 * and extra genes unless `allow_extra`.
 */
CountMatrix align_to_panel(const CountMatrix& m, const std::vector<std::string>& panel, bool allow_extra = false);

nlohmann::ordered_json transform_to_json(const CoordinateTransform& t);
CoordinateTransform transform_from_json(const nlohmann::ordered_json& j);

}  // namespace latmap
