#include <doctest.h>

#include <cmath>

#include "latmap/checkpoint.hpp"
#include "latmap/errors.hpp"
#include "latmap/optim.hpp"
#include "latmap/vae.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace latmap;
using testutil::fd_max_rel_error;
using testutil::random_matrix;

namespace {

VaeArchitecture small_arch(Index input = 8, Index d = 3) {
  VaeArchitecture a;
  a.input_dim = input;
  a.encoder_hidden = {6, 5};
  a.latent_dim = d;
  a.decoder_hidden = {5, 6};
  return a;
}

void zero_all(const std::vector<ad::Tensor>& params) {
  for (auto p : params) p.mutable_value().setZero();
}

/// Redraws the input until no ReLU pre-activation sits within 1e-4 of its kink.
template <typename F>
Matrix smooth_input(F&& loss_of, Index rows, Index cols, std::uint64_t seed) {
  for (std::uint64_t s = seed;; ++s) {
    Matrix x = random_matrix(rows, cols, s);
    if (ad::relu_margin(loss_of(x)) > 1e-4) return x;
  }
}

}  // namespace

TEST_CASE("KL divergence exact values") {
  const ad::Tensor zero(Matrix::Zero(1, 4));
  CHECK(kl_divergence(zero, zero).item() == 0.0);
  CHECK(kl_divergence(ad::Tensor(Matrix::Ones(1, 1)), ad::Tensor(Matrix::Zero(1, 1))).item() ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("KL divergence is nonnegative and matches the closed form") {
  Rng rng(99);
  for (int trial = 0; trial < 10000; ++trial) {
    const Matrix mu = 3.0 * rng.normal_matrix(1, 3);
    const Matrix lv = 2.0 * rng.normal_matrix(1, 3);
    const double kl = kl_divergence(ad::Tensor(mu), ad::Tensor(lv)).item();
    REQUIRE(kl >= 0.0);
    if (trial % 1000 == 0) CHECK(kl == doctest::Approx(oracle::kl_gaussian(mu, lv)).epsilon(1e-12));
  }
}

TEST_CASE("reparameterize trivial cases") {
  const Matrix mu = random_matrix(3, 2, 1);
  const Matrix lv = random_matrix(3, 2, 2);
  CHECK(reparameterize(ad::Tensor(mu), ad::Tensor(lv), Matrix::Zero(3, 2)).value() == mu);
  const Matrix n = random_matrix(3, 2, 3);
  CHECK((reparameterize(ad::Tensor(mu), ad::Tensor(Matrix::Zero(3, 2)), n).value() - (mu + n)).cwiseAbs().maxCoeff() <
        1e-15);
}

TEST_CASE("reparameterize empirical mean matches mu") {
  const Index n = 100000;
  const Matrix mu = Matrix::Constant(n, 1, 0.7);
  const Matrix lv = Matrix::Constant(n, 1, std::log(0.25));  // sigma = 0.5
  Rng rng(5);
  const Matrix z = reparameterize(ad::Tensor(mu), ad::Tensor(lv), rng.normal_matrix(n, 1)).value();
  CHECK(std::abs(z.mean() - 0.7) < 3.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("encoder with zero parameters outputs zero mu and logvar") {
  Rng rng(1);
  const Vae vae(small_arch(), rng);
  zero_all(vae.parameters());
  const auto enc = vae.encode(ad::Tensor(random_matrix(4, 8, 2)));
  CHECK(enc.mu.value().isZero(0.0));
  CHECK(enc.logvar.value().isZero(0.0));
  CHECK(vae.decode(ad::Tensor(random_matrix(4, 3, 3))).value().isZero(0.0));
}

TEST_CASE("duplicated input rows give identical outputs") {
  Rng rng(2);
  const Vae vae(small_arch(), rng);
  Matrix x(2, 8);
  x.row(0) = random_matrix(1, 8, 4);
  x.row(1) = x.row(0);
  const auto enc = vae.encode(ad::Tensor(x));
  CHECK(enc.mu.value().row(0) == enc.mu.value().row(1));
  CHECK(enc.logvar.value().row(0) == enc.logvar.value().row(1));
  const Matrix dec = vae.decode(enc.mu).value();
  CHECK(dec.row(0) == dec.row(1));
}

TEST_CASE("VAE encoder, decoder and full loss pass finite differences") {
  Rng rng(3);
  const Vae vae(small_arch(), rng);
  const auto params = vae.parameters();
  const Matrix noise = random_matrix(5, 3, 6);
  auto full = [&](const Matrix& x) { return vae.loss(ad::Tensor(x), noise, 1.0).total; };
  const Matrix x = smooth_input(full, 5, 8, 10);
  const Matrix w = random_matrix(5, 3, 7);

  auto enc_loss = [&] {
    const auto e = vae.encode(ad::Tensor(x));
    return ad::add(ad::sum(ad::mul(e.mu, ad::Tensor(w))), ad::sum(ad::mul(e.logvar, ad::Tensor(w))));
  };
  auto dec_loss = [&] { return ad::sum(ad::square(vae.decode(ad::Tensor(w)))); };
  CHECK(fd_max_rel_error(enc_loss, params) < 1e-4);
  if (ad::relu_margin(dec_loss()) > 1e-4) CHECK(fd_max_rel_error(dec_loss, params) < 1e-4);
  CHECK(fd_max_rel_error([&] { return full(x); }, params) < 1e-4);
}

TEST_CASE("loss with zero noise and beta 0 is the per-row squared error") {
  Rng rng(4);
  const Vae vae(small_arch(), rng);
  const Matrix x = random_matrix(6, 8, 8);
  const VaeLoss l = vae.loss(ad::Tensor(x), Matrix::Zero(6, 3), 0.0);
  const Matrix xr = vae.decode(ad::Tensor(vae.encode_mean(x))).value();
  CHECK(l.recon.item() == doctest::Approx(oracle::squared_row_distance_mean(xr, x)).epsilon(1e-13));
  CHECK(l.total.item() == l.recon.item());
  const VaeLoss l1 = vae.loss(ad::Tensor(x), Matrix::Zero(6, 3), 2.0);
  CHECK(l1.total.item() == doctest::Approx(l1.recon.item() + 2.0 * l1.kl.item()).epsilon(1e-14));
}

TEST_CASE("200 Adam steps reduce the VAE loss by at least 30%") {
  Rng data(12);
  Matrix x(50, 20);
  for (Index r = 0; r < 50; ++r) {
    const double c = r % 2 == 0 ? 1.0 : -1.0;
    for (Index j = 0; j < 20; ++j) x(r, j) = c * (j % 3 == 0 ? 1.5 : 0.5) + 0.1 * data.normal();
  }
  Rng init(13);
  VaeArchitecture arch = small_arch(20, 2);
  arch.encoder_hidden = {16};
  arch.decoder_hidden = {16};
  const Vae vae(arch, init);
  Adam opt(vae.parameters(), {.lr = 1e-2});
  Rng noise(14);
  const Matrix n0 = Matrix::Zero(50, 2);
  const double first = vae.loss(ad::Tensor(x), n0).total.item();
  for (int step = 0; step < 200; ++step) {
    opt.zero_grad();
    ad::backward(vae.loss(ad::Tensor(x), noise.normal_matrix(50, 2)).total);
    opt.step();
  }
  CHECK(vae.loss(ad::Tensor(x), n0).total.item() <= 0.7 * first);
}

TEST_CASE("clone copies values into independent tensors") {
  Rng rng(5);
  const Vae a(small_arch(), rng, "a");
  const Vae b = a.clone("b");
  const auto pa = a.parameters();
  auto pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].value() == pb[i].value());
    CHECK(pb[i].name().rfind("b.", 0) == 0);
  }
  pb[0].mutable_value()(0, 0) += 1.0;
  CHECK(pa[0].value()(0, 0) != pb[0].value()(0, 0));
}

TEST_CASE("checkpoint round trip is bitwise") {
  Rng rng(6);
  const Vae a(small_arch(), rng, "vae1");
  testutil::TempDir dir("vae_ckpt");
  save_checkpoint(dir / "v.json", a.to_checkpoint());
  const Vae b = Vae::from_checkpoint(load_checkpoint(dir / "v.json"));
  CHECK(b.name() == "vae1");
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].value() == pb[i].value());
  CHECK_THROWS_AS(Vae::from_checkpoint(Checkpoint{"vgae", {}, {}, {}}), DataError);
}

TEST_CASE("run_vae_epoch is deterministic given the rng") {
  const Matrix x = random_matrix(30, 8, 40);
  auto run = [&] {
    Rng init(7);
    const Vae vae(small_arch(), init);
    Adam opt(vae.parameters());
    Rng rng(8);
    run_vae_epoch(vae, opt, x, 7, 1.0, rng);
    const auto e = run_vae_epoch(vae, opt, x, 7, 1.0, rng);
    CHECK(e.steps == 5);
    return vae.encode_mean(x);
  };
  CHECK(run() == run());
}

TEST_CASE("encode_mean with no rows") {
  Rng rng(9);
  const Vae vae(small_arch(), rng);
  const Matrix z = vae.encode_mean(Matrix(0, 8));
  CHECK(z.rows() == 0);
  CHECK(z.cols() == 3);
  CHECK_THROWS_AS(vae.encode(ad::Tensor(Matrix::Zero(2, 7))), DimensionError);
}
