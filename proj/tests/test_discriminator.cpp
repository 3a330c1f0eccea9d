#include <doctest.h>

#include <cmath>

#include "latmap/discriminator.hpp"
#include "latmap/errors.hpp"
#include "latmap/pipeline.hpp"
#include "test_util.hpp"

using namespace latmap;
using testutil::fd_max_rel_error;
using testutil::random_matrix;

namespace {

Matrix cloud(Index n, Index d, double mean, double sd, Rng& rng) {
  return (sd * rng.normal_matrix(n, d)).array() + mean;
}

void zero_all(Discriminator& d) {
  for (auto p : d.parameters()) p.mutable_value().setZero();
}

}  // namespace

TEST_CASE("default discriminator shape") {
  Rng rng(1);
  Discriminator d(10, rng);
  CHECK(d.latent_dim() == 10);
  REQUIRE(d.layers().size() == 4);
  for (std::size_t i = 0; i < 3; ++i) CHECK(d.layers()[i].out_features() == 128);
  CHECK(d.layers()[3].out_features() == 1);
}

TEST_CASE("zero parameters: logits 0 and every row predicted st") {
  Rng rng(2);
  Discriminator d(3, rng);
  zero_all(d);
  const Matrix sc = random_matrix(7, 3, 3);
  const Matrix st = random_matrix(5, 3, 4);
  CHECK(d.logits(sc).isZero(0.0));
  CHECK(ad::sigmoid(d.forward(ad::Tensor(sc))).value().isConstant(0.5));
  CHECK(disc_accuracy(d, sc, st) == doctest::Approx(5.0 / 12.0));
}

TEST_CASE("duplicated rows get duplicated logits") {
  Rng rng(5);
  const Discriminator d(4, rng);
  Matrix z(2, 4);
  z.row(0) = random_matrix(1, 4, 6).row(0);
  z.row(1) = z.row(0);
  const Vector l = d.logits(z);
  CHECK(l(0) == l(1));
}

TEST_CASE("separated 1-D clouds with a fitted threshold score 1") {
  Rng rng(7);
  Discriminator d(1, rng, 2, 1);
  // hidden unit = relu(z), logit = 2*h - 1: predicts sc iff z > 0.5
  d.layers()[0].weight.mutable_value() << 1.0, 0.0;
  d.layers()[0].bias.mutable_value().setZero();
  d.layers()[1].weight.mutable_value() << 2.0, 0.0;
  d.layers()[1].bias.mutable_value() << -1.0;
  const Matrix sc = cloud(50, 1, 3.0, 0.3, rng);
  const Matrix st = cloud(50, 1, -3.0, 0.3, rng);
  CHECK(disc_accuracy(d, sc, st) == 1.0);
}

TEST_CASE("discriminator gradients pass finite differences") {
  for (std::uint64_t seed = 8;; ++seed) {
    Rng rng(seed);
    const Discriminator d(4, rng, 16, 3);
    const Matrix sc = random_matrix(5, 4, seed + 100);
    const Matrix st = random_matrix(6, 4, seed + 200);
    auto loss = [&] { return discriminator_loss(d, sc, st); };
    if (ad::relu_margin(loss()) < 1e-4) continue;
    CHECK(fd_max_rel_error(loss, d.parameters()) < 1e-4);
    break;
  }
}

TEST_CASE("train_discriminator returns at once when already separating") {
  Rng rng(9);
  Discriminator d(1, rng, 2, 1);
  d.layers()[0].weight.mutable_value() << 1.0, 0.0;
  d.layers()[0].bias.mutable_value().setZero();
  d.layers()[1].weight.mutable_value() << 2.0, 0.0;
  d.layers()[1].bias.mutable_value() << -1.0;
  const Matrix before = d.layers()[0].weight.value();
  Adam opt(d.parameters());
  const auto r = train_discriminator(d, opt, cloud(20, 1, 3.0, 0.3, rng), cloud(20, 1, -3.0, 0.3, rng), 0.9, 50);
  CHECK(r.steps == 0);
  CHECK(r.accuracy == 1.0);
  CHECK(d.layers()[0].weight.value() == before);
}

TEST_CASE("disjoint Gaussian clouds are separated within 10 epochs") {
  Rng rng(10);
  const Matrix sc = cloud(1000, 10, 3.0, 0.5, rng);
  const Matrix st = cloud(1000, 10, -3.0, 0.5, rng);
  Discriminator d(10, rng);
  Adam opt(d.parameters());
  const auto r = train_discriminator(d, opt, sc, st, 0.95, 10);
  CHECK(r.accuracy >= 0.95);
  CHECK(r.steps <= 10);
}

TEST_CASE("identical clouds run to T and stay near chance on held-out draws") {
  Rng rng(11);
  const Matrix sc = cloud(1000, 10, 0.0, 1.0, rng);
  const Matrix st = cloud(1000, 10, 0.0, 1.0, rng);
  Discriminator d(10, rng);
  Adam opt(d.parameters());
  const auto r = train_discriminator(d, opt, sc, st, 0.99, 60);
  CHECK(r.steps == 60);
  const double held = disc_accuracy(d, cloud(1000, 10, 0.0, 1.0, rng), cloud(1000, 10, 0.0, 1.0, rng));
  CHECK(held >= 0.4);
  CHECK(held <= 0.6);
}

TEST_CASE("fresh discriminator separability: identical vs disjoint sets") {
  Rng rng(12);
  const double same = fresh_discriminator_accuracy(cloud(600, 10, 0.0, 1.0, rng), cloud(600, 10, 0.0, 1.0, rng), 3);
  CHECK(same >= 0.4);
  CHECK(same <= 0.6);
  const double apart = fresh_discriminator_accuracy(cloud(600, 10, 1.0, 1.0, rng), cloud(600, 10, -1.0, 1.0, rng), 3);
  CHECK(apart >= 0.9);
}

TEST_CASE("generator loss values") {
  Rng rng(13);
  Discriminator d(2, rng, 4, 1);
  zero_all(d);
  const ad::Tensor z(random_matrix(3, 2, 14));
  CHECK(adversarial_generator_loss(d, z, kScLabel).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  d.layers().back().bias.mutable_value() << 20.0;  // logit +20 everywhere: fully fooled
  CHECK(adversarial_generator_loss(d, z, kScLabel).item() < 1e-8);
}

TEST_CASE("one generator step raises D's sc probability on a 1-D toy") {
  Rng rng(15);
  Discriminator d(1, rng, 8, 1);
  auto z = ad::Tensor::parameter(Matrix::Constant(4, 1, -0.5), "z");
  z.mutable_value() << -0.5, -0.2, 0.1, 0.4;
  const double before = ad::sigmoid(d.forward(z)).value().mean();
  Adam opt({z}, {.lr = 1e-2});
  ad::backward(adversarial_generator_loss(d, z, kScLabel));
  opt.step();
  const double after = ad::sigmoid(d.forward(z)).value().mean();
  CHECK(after > before);
}

TEST_CASE("discriminator checkpoint round trip") {
  Rng rng(16);
  const Discriminator d(5, rng, 12, 2);
  const auto e = Discriminator::from_checkpoint(checkpoint_from_json(to_json(d.to_checkpoint())));
  const auto a = d.parameters();
  const auto b = e.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].value() == b[i].value());
  CHECK_THROWS_AS(disc_accuracy(d, Matrix(0, 5), Matrix::Zero(1, 5)), DataError);
}
