#include <doctest.h>

#include <cmath>
#include <set>

#include "latmap/errors.hpp"
#include "latmap/graph.hpp"
#include "latmap/optim.hpp"
#include "latmap/vgae.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace latmap;
using testutil::fd_max_rel_error;
using testutil::random_matrix;

namespace {

Matrix grid(Index side) {
  Matrix xy(side * side, 2);
  for (Index i = 0; i < side * side; ++i) {
    xy(i, 0) = static_cast<double>(i % side);
    xy(i, 1) = static_cast<double>(i / side);
  }
  return xy;
}

VgaeArchitecture small_arch(Index genes = 7) {
  VgaeArchitecture a;
  a.input_dim = genes;
  a.latent_dim = 4;
  a.expr_hidden = {6};
  a.gcn_hidden = 5;
  a.decoder_hidden = {6};
  a.coord_hidden = {4};
  return a;
}

Matrix dense(const SparseMatrix& s) { return Matrix(s); }

}  // namespace

TEST_CASE("knn graph on three collinear points") {
  Matrix xy(3, 2);
  xy << 0, 0, 1, 0, 3, 0;
  const auto g = build_knn_graph(xy, 1);
  CHECK(g.edges == std::vector<std::pair<Index, Index>>{{0, 1}, {1, 2}});
}

TEST_CASE("knn graph with two points") {
  Matrix xy(2, 2);
  xy << 0, 0, 5, 5;
  CHECK(build_knn_graph(xy, 1).edges == std::vector<std::pair<Index, Index>>{{0, 1}});
  CHECK_THROWS_AS(build_knn_graph(xy, 2), DataError);
}

TEST_CASE("knn graph on a grid gives interior spots their axis neighbours") {
  const Matrix xy = grid(5);
  const auto g = build_knn_graph(xy, 4);
  const Index centre = 12;
  std::set<Index> nb;
  for (const auto& [i, j] : g.edges) {
    if (i == centre) nb.insert(j);
    if (j == centre) nb.insert(i);
  }
  CHECK(nb == std::set<Index>{7, 11, 13, 17});
}

TEST_CASE("knn graph edges match brute force on random points") {
  const Matrix xy = random_matrix(40, 2, 3);
  const auto g = build_knn_graph(xy, 5);
  const auto expect = oracle::knn_edges(xy, 5);
  CHECK(std::set<std::pair<Index, Index>>(g.edges.begin(), g.edges.end()) == expect);
  const Matrix a = dense(g.adjacency);
  CHECK(a == a.transpose());
}

TEST_CASE("normalized adjacency hand values") {
  const auto g = graph_from_edges(2, {{0, 1}});
  const Matrix a = dense(g.norm_adj);
  CHECK((a - Matrix::Constant(2, 2, 0.5)).cwiseAbs().maxCoeff() < 1e-15);

  const auto iso = graph_from_edges(3, {{0, 1}});
  const Matrix b = dense(iso.norm_adj);
  CHECK(b(2, 2) == 1.0);
  CHECK(b(2, 0) == 0.0);
  CHECK(b(2, 1) == 0.0);
}

TEST_CASE("normalized adjacency is symmetric with spectral radius at most one") {
  Rng rng(4);
  std::vector<std::pair<Index, Index>> e;
  for (int t = 0; t < 9; ++t) e.emplace_back(rng.uniform_int(0, 5), rng.uniform_int(0, 5));
  const auto g = graph_from_edges(6, e);
  const Matrix a = dense(g.norm_adj);
  CHECK(a.allFinite());
  CHECK((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  CHECK(es.eigenvalues().cwiseAbs().maxCoeff() <= 1.0 + 1e-9);
}

TEST_CASE("gcn layer with identity adjacency is a dense layer") {
  SparseMatrix eye(4, 4);
  eye.setIdentity();
  const Matrix h = random_matrix(4, 3, 5);
  const Matrix w = random_matrix(3, 2, 6);
  CHECK((gcn_layer(eye, ad::Tensor(h), ad::Tensor(w), false).value() - h * w).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(gcn_layer(eye, ad::Tensor(h), ad::Tensor(w), true).value() == (h * w).cwiseMax(0.0));
}

TEST_CASE("gcn layer keeps constant rows constant on a regular graph") {
  // 6-cycle: every node has degree 2.
  const auto g = graph_from_edges(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}});
  Matrix h(6, 3);
  h.rowwise() = random_matrix(1, 3, 7).row(0);
  const Matrix out = gcn_layer(g.norm_adj, ad::Tensor(h), ad::Tensor(random_matrix(3, 2, 8)), false).value();
  for (Index r = 1; r < 6; ++r) CHECK((out.row(r) - out.row(0)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("two stacked gcn layers pass finite differences") {
  const auto g = build_knn_graph(random_matrix(8, 2, 9), 3);
  auto w0 = ad::Tensor::parameter(random_matrix(5, 4, 10), "w0");
  auto w1 = ad::Tensor::parameter(random_matrix(4, 3, 11), "w1");
  auto h = ad::Tensor::parameter(random_matrix(8, 5, 12), "h");
  const Matrix t = random_matrix(8, 3, 13);
  auto loss = [&] {
    return ad::sum(ad::mul(gcn_layer(g.norm_adj, gcn_layer(g.norm_adj, h, w0, true), w1, false), ad::Tensor(t)));
  };
  REQUIRE(ad::relu_margin(loss()) > 1e-4);
  CHECK(fd_max_rel_error(loss, {w0, w1, h}) < 1e-4);
}

TEST_CASE("vgae with identity adjacency and zero gcn weights ignores the graph path") {
  Rng rng(14);
  Vgae v(small_arch(), rng);
  for (auto& w : v.gcn_weights()) w.mutable_value().setZero();
  const Matrix x = random_matrix(6, 7, 15);
  SparseMatrix eye(6, 6);
  eye.setIdentity();
  const auto e = v.encode_parts(eye, ad::Tensor(x));
  CHECK(e.graph_part.value().isZero(0.0));
  const auto g = build_knn_graph(random_matrix(6, 2, 16), 2);
  const auto e2 = v.encode_parts(g.norm_adj, ad::Tensor(x));
  CHECK(e2.merged.value() == e.merged.value());
  CHECK(e.merged.cols() == 4);
  CHECK(e.expr_part.cols() + e.graph_part.cols() == 4);
}

TEST_CASE("vgae encoder is permutation equivariant") {
  Rng rng(17);
  const Vgae v(small_arch(), rng);
  const Matrix xy = random_matrix(9, 2, 18);
  const Matrix x = random_matrix(9, 7, 19);
  const std::vector<Index> perm{3, 0, 8, 1, 5, 2, 7, 4, 6};
  Matrix xy_p(9, 2), x_p(9, 7);
  for (Index i = 0; i < 9; ++i) {
    xy_p.row(i) = xy.row(perm[static_cast<std::size_t>(i)]);
    x_p.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  }
  const Matrix z = v.encode_mean(build_knn_graph(xy, 3).norm_adj, x);
  const Matrix z_p = v.encode_mean(build_knn_graph(xy_p, 3).norm_adj, x_p);
  for (Index i = 0; i < 9; ++i) {
    CHECK((z_p.row(i) - z.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("vgae decoders: zero latent, symmetry, finite differences") {
  Rng rng(20);
  const Vgae v(small_arch(), rng);
  const auto dec0 = v.decode(ad::Tensor(Matrix::Zero(5, 4)));
  const Matrix p0 = ad::sigmoid(dec0.adj_logits).value();
  CHECK((p0.array() == 0.5).all());
  const Matrix z = random_matrix(5, 4, 21);
  const Matrix logits = v.decode(ad::Tensor(z)).adj_logits.value();
  CHECK(logits == logits.transpose());

  const auto params = v.parameters();
  auto zp = ad::Tensor::parameter(z, "z");
  auto loss = [&] {
    const auto d = v.decode(zp);
    return ad::add(ad::add(ad::sum(ad::square(d.expression)), ad::sum(ad::square(d.coords))),
                   ad::mean(ad::sigmoid(d.adj_logits)));
  };
  REQUIRE(ad::relu_margin(loss()) > 1e-4);
  std::vector<ad::Tensor> all = params;
  all.push_back(zp);
  CHECK(fd_max_rel_error(loss, all) < 1e-4);
}

TEST_CASE("vgae full loss passes finite differences") {
  const auto g = build_knn_graph(random_matrix(8, 2, 22), 3);
  Rng trng(23);
  const auto adj = sample_adjacency_targets(g, trng);
  const Matrix coords = random_matrix(8, 2, 24);
  const Matrix noise = random_matrix(8, 4, 25);
  for (std::uint64_t seed = 26;; ++seed) {
    Rng rng(seed);
    const Vgae v(small_arch(), rng);
    const Matrix x = random_matrix(8, 7, seed + 1000);
    auto loss = [&] { return v.loss(g.norm_adj, x, coords, adj, noise, {1.0, 2.0, 0.5, 1.0}).total; };
    if (ad::relu_margin(loss()) < 1e-4) continue;
    CHECK(fd_max_rel_error(loss, v.parameters()) < 1e-4);
    break;
  }
}

TEST_CASE("vgae loss with only KL at the prior is zero") {
  Rng rng(27);
  const Vgae v(small_arch(), rng);
  auto params = v.parameters();
  for (auto& p : params) p.mutable_value().setZero();
  const auto g = build_knn_graph(random_matrix(6, 2, 28), 2);
  Rng trng(29);
  const auto t = v.loss(g.norm_adj, random_matrix(6, 7, 30), random_matrix(6, 2, 31),
                        sample_adjacency_targets(g, trng), Matrix::Zero(6, 4), {0.0, 0.0, 0.0, 1.0});
  CHECK(t.total.item() == 0.0);
}

TEST_CASE("adjacency targets: positives are A+I, negatives are disjoint and balanced") {
  const auto g = build_knn_graph(grid(6), 4);
  Rng rng(32);
  const auto t = sample_adjacency_targets(g, rng);
  const Index n = g.n;
  const Matrix a = dense(g.adjacency) + Matrix::Identity(n, n);
  Index pos = 0;
  std::set<Index> seen;
  for (std::size_t i = 0; i < t.flat.size(); ++i) {
    CHECK(seen.insert(t.flat[i]).second);
    const double truth = a.data()[t.flat[i]] > 0.0 ? 1.0 : 0.0;
    CHECK(t.labels(static_cast<Index>(i), 0) == truth);
    pos += truth > 0.0;
  }
  CHECK(pos == static_cast<Index>((a.array() > 0.0).count()));
  CHECK(static_cast<Index>(t.flat.size()) == 2 * pos);
}

TEST_CASE("free latent codes learn a 4-node path graph") {
  const auto g = graph_from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
  Rng rng(33);
  const auto t = sample_adjacency_targets(g, rng);
  auto z = ad::Tensor::parameter(0.1 * rng.normal_matrix(4, 4), "z");
  Adam opt({z}, {.lr = 0.05});
  auto loss = [&] { return ad::bce_with_logits(ad::gather(ad::matmul(z, ad::transpose(z)), t.flat), t.labels); };
  for (int i = 0; i < 2000; ++i) {
    opt.zero_grad();
    ad::backward(loss());
    opt.step();
  }
  CHECK(loss().item() < 0.1);
}

TEST_CASE("300 Adam steps reduce the VGAE loss by at least 30%") {
  const Matrix xy = grid(7).topRows(49);
  Rng data(34);
  Matrix x(49, 10);
  for (Index i = 0; i < 49; ++i) {
    for (Index j = 0; j < 10; ++j) x(i, j) = (xy(i, 0) > 3 ? 1.0 : 0.0) * (j % 2) + 0.2 * data.normal() + 1.0;
  }
  const auto g = build_knn_graph(xy, 4);
  const auto tr = CoordinateTransform::fit(xy);
  const Matrix c = tr.normalize(xy);
  Rng init(35);
  const Vgae v(small_arch(10), init);
  Adam opt(v.parameters(), {.lr = 5e-3});
  Rng rng(36);
  Rng eval(37);
  const auto eval_adj = sample_adjacency_targets(g, eval);
  const VgaeLossWeights w{};
  const double first = v.loss(g.norm_adj, x, c, eval_adj, Matrix::Zero(49, 4), w).total.item();
  for (int i = 0; i < 300; ++i) {
    const auto adj = sample_adjacency_targets(g, rng);
    opt.zero_grad();
    ad::backward(v.loss(g.norm_adj, x, c, adj, rng.normal_matrix(49, 4), w).total);
    opt.step();
  }
  CHECK(v.loss(g.norm_adj, x, c, eval_adj, Matrix::Zero(49, 4), w).total.item() <= 0.7 * first);
}

TEST_CASE("coordinate transform round trip") {
  const Matrix xy = 10.0 * random_matrix(20, 2, 38).array() + 3.0;
  const auto t = CoordinateTransform::fit(xy);
  const Matrix n = t.normalize(xy);
  CHECK(std::abs(n.col(0).mean()) < 1e-12);
  CHECK(std::abs(n.rowwise().squaredNorm().mean() - 1.0) < 1e-12);
  CHECK((t.denormalize(n) - xy).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("vgae checkpoint round trip") {
  Rng rng(39);
  const Vgae v(small_arch(), rng);
  const Vgae w = Vgae::from_checkpoint(checkpoint_from_json(to_json(v.to_checkpoint())));
  const auto a = v.parameters();
  const auto b = w.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].value() == b[i].value());
}
