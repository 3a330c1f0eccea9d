#pragma once

#include <string>
#include <vector>

#include "latmap/checkpoint.hpp"
#include "latmap/layers.hpp"
#include "latmap/optim.hpp"

namespace latmap {

/// Label convention: sc codes are class 1, st codes class 0.
inline constexpr double kScLabel = 1.0;
inline constexpr double kStLabel = 0.0;

/// Binary classifier over latent codes: `hidden_layers` ReLU layers of
/// `hidden_width` units, then one linear logit.
class Discriminator {
 public:
  Discriminator(Index latent_dim, Rng& rng, Index hidden_width = 128, Index hidden_layers = 3,
                std::string name = "disc");

  Index latent_dim() const { return net_.in_features(); }

  /// n x 1 logits.
  ad::Tensor forward(const ad::Tensor& z) const;
  Vector logits(const Matrix& z) const;

  std::vector<ad::Tensor> parameters() const;
  std::vector<Linear>& layers() { return net_.layers(); }

  Checkpoint to_checkpoint() const;
  static Discriminator from_checkpoint(const Checkpoint& ckpt);

 private:
  Mlp net_;
  Index hidden_width_;
  Index hidden_layers_;
  std::string name_;
};

/// Fraction of rows classified correctly when sc rows are labelled 1 and st
/// rows 0; a row is predicted 1 iff its logit is strictly positive.
double disc_accuracy(const Discriminator& d, const Matrix& z_sc, const Matrix& z_st);

/// Mean BCE-with-logits over the concatenation of both sets.
ad::Tensor discriminator_loss(const Discriminator& d, const Matrix& z_sc, const Matrix& z_st);

struct DiscTrainResult {
  double accuracy = 0.0;
  Index steps = 0;
};

/**
 * Full-batch Adam steps on `discriminator_loss` until the accuracy reaches
 * `alpha` or `max_iters` steps have been taken. Accuracy is checked before
 * every step, so an already-separating discriminator takes no step.
 */
DiscTrainResult train_discriminator(const Discriminator& d, Adam& opt, const Matrix& z_sc, const Matrix& z_st,
                                    double alpha = 0.9, Index max_iters = 50);

/**
 * Non-saturating generator loss: BCE of D(z) against `target_label`, the label
 * of the other dataset. Gradients flow into whatever produced `z`; the
 * discriminator parameters receive gradients too and must not be stepped.
 */
ad::Tensor adversarial_generator_loss(const Discriminator& d, const ad::Tensor& z, double target_label = kScLabel);

}  // namespace latmap
