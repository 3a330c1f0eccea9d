#include "latmap/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <type_traits>

#include "latmap/errors.hpp"
#include "latmap/matrix_io.hpp"

namespace latmap {

void TrainConfig::validate() const {
  for (Index e : {s1_epochs, s2_epochs, s2b_epochs, s3_epochs}) {
    if (e < 1) throw std::invalid_argument("TrainConfig: every stage needs at least one epoch");
  }
  for (double w : {lambda_l1, lambda_l2, lambda_l3, lambda_recon_exp, lambda_recon_sp, lambda_recon_adj, beta_kl}) {
    if (!(w >= 0.0)) throw std::invalid_argument("TrainConfig: loss weights must be >= 0");
  }
  if (latent_dim <= 0 || latent_dim % 2 != 0) {
    throw std::invalid_argument("TrainConfig: latent_dim must be positive and even, got " + std::to_string(latent_dim));
  }
  if (s2_warmup_epochs < 0) throw std::invalid_argument("TrainConfig: s2_warmup_epochs must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("TrainConfig: alpha must be in [0, 1]");
  if (T < 0) throw std::invalid_argument("TrainConfig: T must be >= 0");
  if (!(lr > 0.0) || !(lr_vgae > 0.0) || !(lr_st > 0.0)) throw std::invalid_argument("TrainConfig: learning rates must be positive");
  if (graph_k < 1) throw std::invalid_argument("TrainConfig: graph_k must be >= 1");
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["s1_epochs"] = s1_epochs;
  j["s2_epochs"] = s2_epochs;
  j["s2b_epochs"] = s2b_epochs;
  j["s3_epochs"] = s3_epochs;
  j["s2_warmup_epochs"] = s2_warmup_epochs;
  j["alpha"] = alpha;
  j["T"] = T;
  j["latent_dim"] = latent_dim;
  j["lambda_l1"] = lambda_l1;
  j["lambda_l2"] = lambda_l2;
  j["lambda_l3"] = lambda_l3;
  j["lambda_recon_exp"] = lambda_recon_exp;
  j["lambda_recon_sp"] = lambda_recon_sp;
  j["lambda_recon_adj"] = lambda_recon_adj;
  j["beta_kl"] = beta_kl;
  j["lr"] = lr;
  j["lr_vgae"] = lr_vgae;
  j["lr_st"] = lr_st;
  j["seed"] = seed;
  j["batch_size"] = batch_size;
  j["graph_k"] = graph_k;
  j["squared_latent_loss"] = squared_latent_loss;
  j["freeze_sc_adversarial"] = freeze_sc_adversarial;
  j["shared_st_init"] = shared_st_init;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw std::invalid_argument("TrainConfig: expected a JSON object");
  TrainConfig c;
  const auto known = c.to_json();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) throw std::invalid_argument("TrainConfig: unknown key '" + it.key() + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    using T = std::decay_t<decltype(field)>;
    const auto& v = j.at(key);
    const bool ok = std::is_same_v<T, bool> ? v.is_boolean()
                    : std::is_integral_v<T> ? v.is_number_integer()
                                            : v.is_number();
    if (!ok) throw std::invalid_argument(std::string("TrainConfig: wrong type for '") + key + "'");
    field = v.get<T>();
  };
  get("s1_epochs", c.s1_epochs);
  get("s2_epochs", c.s2_epochs);
  get("s2b_epochs", c.s2b_epochs);
  get("s3_epochs", c.s3_epochs);
  get("s2_warmup_epochs", c.s2_warmup_epochs);
  get("alpha", c.alpha);
  get("T", c.T);
  get("latent_dim", c.latent_dim);
  get("lambda_l1", c.lambda_l1);
  get("lambda_l2", c.lambda_l2);
  get("lambda_l3", c.lambda_l3);
  get("lambda_recon_exp", c.lambda_recon_exp);
  get("lambda_recon_sp", c.lambda_recon_sp);
  get("lambda_recon_adj", c.lambda_recon_adj);
  get("beta_kl", c.beta_kl);
  get("lr", c.lr);
  get("lr_vgae", c.lr_vgae);
  get("lr_st", c.lr_st);
  get("seed", c.seed);
  get("batch_size", c.batch_size);
  get("graph_k", c.graph_k);
  get("squared_latent_loss", c.squared_latent_loss);
  get("freeze_sc_adversarial", c.freeze_sc_adversarial);
  get("shared_st_init", c.shared_st_init);
  return c;
}

void TrainConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("expected key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  auto j = to_json();
  if (!j.contains(key)) throw std::invalid_argument("TrainConfig: unknown key '" + key + "'");
  const auto parsed = nlohmann::ordered_json::parse(assignment.substr(eq + 1), nullptr, false);
  if (parsed.is_discarded()) throw std::invalid_argument("cannot parse value for '" + key + "'");
  j[key] = parsed;
  *this = from_json(j);
}

ad::Tensor euclidean_latent_loss(const ad::Tensor& za, const ad::Tensor& zb, bool squared) {
  if (za.rows() != zb.rows() || za.cols() != zb.cols()) {
    throw DimensionError("euclidean_latent_loss: shapes " + std::to_string(za.rows()) + "x" +
                         std::to_string(za.cols()) + " and " + std::to_string(zb.rows()) + "x" +
                         std::to_string(zb.cols()) + " differ");
  }
  const ad::Tensor d2 = ad::row_sum(ad::square(ad::sub(za, zb)));
  return ad::mean(squared ? d2 : ad::sqrt(d2));
}

double HistoryTable::at(std::size_t row, const std::string& column) const {
  const auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) throw std::out_of_range("history has no column '" + column + "'");
  return rows.at(row).at(static_cast<std::size_t>(it - columns.begin()));
}

void HistoryTable::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << format_double(r[c]);
    out << "\n";
  }
}

namespace {

AdamOptions adam_with_lr(double lr) {
  AdamOptions o;
  o.lr = lr;
  return o;
}

VaeArchitecture vae_arch(Index input_dim, Index latent_dim) {
  VaeArchitecture a;
  a.input_dim = input_dim;
  a.latent_dim = latent_dim;
  return a;
}

/// Noise-free full-batch loss terms.
VaeLoss eval_vae(const Vae& vae, const Matrix& x, double beta) {
  ad::NoGradGuard guard;
  return vae.loss(ad::Tensor(x), Matrix::Zero(x.rows(), vae.architecture().latent_dim), beta);
}

template <typename F>
void with_step_report(const char* stage, Index step, F&& body) {
  try {
    body();
  } catch (const NumericError& e) {
    throw NumericError(std::string(stage) + ", step " + std::to_string(step) + ": " + e.what());
  }
}

void require_fixed(const LatentMatrix& z, const char* what) {
  if (!z.fixed) throw DependencyError(std::string(what) + " must be a fixed latent from the previous stage");
}

}  // namespace

Stage1Result stage1(const TrainConfig& cfg, const Matrix& x) {
  cfg.validate();
  if (x.rows() == 0) throw DataError("stage 1: empty sc matrix");
  const Rng root(cfg.seed);
  Rng init = root.derive("vae1");
  Vae vae(vae_arch(x.cols(), cfg.latent_dim), init, "vae1");
  Adam opt(vae.parameters(), adam_with_lr(cfg.lr));
  Rng batches = root.derive("vae1.batches");

  HistoryTable h{{"step", "total", "recon", "kl"}, {}};
  auto snapshot = [&](Index step) {
    const VaeLoss l = eval_vae(vae, x, cfg.beta_kl);
    h.rows.push_back({static_cast<double>(step), l.total.item(), l.recon.item(), l.kl.item()});
  };
  with_step_report("stage 1", 0, [&] { snapshot(0); });
  for (Index e = 1; e <= cfg.s1_epochs; ++e) {
    with_step_report("stage 1", e, [&] {
      run_vae_epoch(vae, opt, x, cfg.batch_size, cfg.beta_kl, batches);
      snapshot(e);
    });
  }
  LatentMatrix z{vae.encode_mean(x), LatentSource::sc2000, true};
  return {std::move(vae), std::move(z), std::move(h)};
}

Stage2Result stage2(const TrainConfig& cfg, const Matrix& x_sc, const Matrix& x_st, const LatentMatrix& z_sc2000) {
  cfg.validate();
  require_fixed(z_sc2000, "stage 2: the sc 2000-gene latent");
  if (z_sc2000.codes.rows() != x_sc.rows()) {
    throw DimensionError("stage 2: " + std::to_string(x_sc.rows()) + " sc rows but " +
                         std::to_string(z_sc2000.codes.rows()) + " fixed latent rows");
  }
  if (z_sc2000.dim() != cfg.latent_dim) throw DimensionError("stage 2: fixed latent width differs from latent_dim");
  if (x_sc.cols() != x_st.cols()) throw DimensionError("stage 2: sc and st matrices are on different panels");
  if (x_sc.rows() == 0 || x_st.rows() == 0) throw DataError("stage 2: empty input");

  const Rng root(cfg.seed);
  const auto arch = vae_arch(x_sc.cols(), cfg.latent_dim);
  Rng init2 = root.derive("vae2");
  Vae vae2(arch, init2, "vae2");
  Rng init_d = root.derive("disc");
  Discriminator disc(cfg.latent_dim, init_d);
  Adam opt2(vae2.parameters(), adam_with_lr(cfg.lr));
  Adam opt_d(disc.parameters(), adam_with_lr(cfg.lr));
  Rng batches2 = root.derive("vae2.batches");
  Rng batches3 = root.derive("vae3.batches");

  const Matrix& target = z_sc2000.codes;
  const bool sq = cfg.squared_latent_loss;
  auto l1_term = [&](const Encoding& enc, std::span<const Index> rows) {
    return ad::scale(euclidean_latent_loss(enc.mu, ad::Tensor(gather_rows(target, rows)), sq), cfg.lambda_l1);
  };
  const bool adv_sc = cfg.lambda_l2 > 0.0 && !cfg.freeze_sc_adversarial;
  ExtraLoss warmup_extra;
  ExtraLoss extra2;
  ExtraLoss extra3;
  if (cfg.lambda_l1 > 0.0) warmup_extra = l1_term;
  if (cfg.lambda_l1 > 0.0 || adv_sc) {
    extra2 = [&](const Encoding& enc, std::span<const Index> rows) {
      ad::Tensor t;
      if (cfg.lambda_l1 > 0.0) t = l1_term(enc, rows);
      if (adv_sc) {
        const ad::Tensor a = ad::scale(adversarial_generator_loss(disc, enc.mu, kStLabel), cfg.lambda_l2);
        t = t.defined() ? ad::add(t, a) : a;
      }
      return t;
    };
  }
  if (cfg.lambda_l2 > 0.0) {
    extra3 = [&](const Encoding& enc, std::span<const Index>) {
      return ad::scale(adversarial_generator_loss(disc, enc.mu, kScLabel), cfg.lambda_l2);
    };
  }

  // With shared_st_init the st model is replaced by a copy of the sc model
  // after the warm-up; until then its columns describe a stand-in.
  Rng init3 = root.derive("vae3");
  Vae vae3(arch, init3, "vae3");
  DiscTrainResult dres{0.0, 0};
  HistoryTable h{{"step", "epoch", "inner", "disc_accuracy", "disc_steps", "l1", "adv_sc", "adv_st", "recon_sc",
                  "kl_sc", "recon_st", "kl_st"},
                 {}};
  auto snapshot = [&](Index step, Index epoch, Index inner) {
    const VaeLoss lsc = eval_vae(vae2, x_sc, cfg.beta_kl);
    const VaeLoss lst = eval_vae(vae3, x_st, cfg.beta_kl);
    ad::NoGradGuard guard;
    const ad::Tensor zsc(vae2.encode_mean(x_sc));
    const ad::Tensor zst(vae3.encode_mean(x_st));
    h.rows.push_back({static_cast<double>(step), static_cast<double>(epoch), static_cast<double>(inner),
                      dres.accuracy, static_cast<double>(dres.steps),
                      euclidean_latent_loss(zsc, ad::Tensor(target), sq).item(),
                      adversarial_generator_loss(disc, zsc, kStLabel).item(),
                      adversarial_generator_loss(disc, zst, kScLabel).item(), lsc.recon.item(), lsc.kl.item(),
                      lst.recon.item(), lst.kl.item()});
  };
  Index step = 0;
  with_step_report("stage 2", 0, [&] { snapshot(0, 0, 0); });
  for (Index w = 1; w <= cfg.s2_warmup_epochs; ++w) {
    ++step;
    with_step_report("stage 2 warm-up", step, [&] {
      run_vae_epoch(vae2, opt2, x_sc, cfg.batch_size, cfg.beta_kl, batches2, warmup_extra);
      snapshot(step, 0, w);
    });
  }
  if (cfg.shared_st_init) vae3 = vae2.clone("vae3");
  Adam opt3(vae3.parameters(), adam_with_lr(cfg.lr_st));
  for (Index e = 1; e <= cfg.s2_epochs; ++e) {
    with_step_report("stage 2 discriminator", step, [&] {
      dres = train_discriminator(disc, opt_d, vae2.encode_mean(x_sc), vae3.encode_mean(x_st), cfg.alpha, cfg.T);
    });
    for (Index b = 1; b <= cfg.s2b_epochs; ++b) {
      ++step;
      with_step_report("stage 2", step, [&] {
        run_vae_epoch(vae2, opt2, x_sc, cfg.batch_size, cfg.beta_kl, batches2, extra2);
        run_vae_epoch(vae3, opt3, x_st, cfg.batch_size, cfg.beta_kl, batches3, extra3);
        snapshot(step, e, b);
      });
    }
  }
  LatentMatrix z_sc{vae2.encode_mean(x_sc), LatentSource::sc500, true};
  LatentMatrix z_st{vae3.encode_mean(x_st), LatentSource::st_exp500, true};
  return {std::move(vae2), std::move(vae3), std::move(disc), std::move(z_sc), std::move(z_st), std::move(h)};
}

double fresh_discriminator_accuracy(const Matrix& z_sc, const Matrix& z_st, std::uint64_t seed, double alpha, Index T,
                                    double lr) {
  if (z_sc.cols() != z_st.cols()) throw DimensionError("fresh discriminator: code widths differ");
  if (z_sc.rows() < 2 || z_st.rows() < 2) throw DataError("fresh discriminator: need at least two rows per set");
  const Rng root(seed);
  Rng split = root.derive("fresh_disc.split");
  auto halves = [&](const Matrix& z) {
    const std::vector<Index> perm = split.permutation(z.rows());
    const auto n_fit = static_cast<std::ptrdiff_t>(z.rows() / 2);
    const std::vector<Index> fit(perm.begin(), perm.begin() + n_fit);
    const std::vector<Index> held(perm.begin() + n_fit, perm.end());
    return std::pair{gather_rows(z, fit), gather_rows(z, held)};
  };
  const auto [sc_fit, sc_held] = halves(z_sc);
  const auto [st_fit, st_held] = halves(z_st);
  Rng init = root.derive("fresh_disc");
  Discriminator d(z_sc.cols(), init);
  Adam opt(d.parameters(), adam_with_lr(lr));
  train_discriminator(d, opt, sc_fit, st_fit, alpha, T);
  return disc_accuracy(d, sc_held, st_held);
}

Stage3Result stage3(const TrainConfig& cfg, const Matrix& x, const Matrix& coords, const LatentMatrix& z_st) {
  cfg.validate();
  require_fixed(z_st, "stage 3: the st 500-gene latent");
  if (z_st.codes.rows() != x.rows() || coords.rows() != x.rows()) {
    throw DimensionError("stage 3: expression, coordinates and fixed latent must have the same spot count");
  }
  if (z_st.dim() != cfg.latent_dim) throw DimensionError("stage 3: fixed latent width differs from latent_dim");

  const Rng root(cfg.seed);
  const CoordinateTransform transform = CoordinateTransform::fit(coords);
  const Matrix coords_n = transform.normalize(coords);
  const SpatialGraph graph = build_knn_graph(coords, cfg.graph_k);
  VgaeArchitecture arch;
  arch.input_dim = x.cols();
  arch.latent_dim = cfg.latent_dim;
  Rng init = root.derive("vgae");
  Vgae vgae(arch, init);
  Adam opt(vgae.parameters(), adam_with_lr(cfg.lr_vgae));
  Rng rng = root.derive("vgae.epochs");
  Rng eval_rng = root.derive("vgae.eval");
  const AdjacencyTargets eval_adj = sample_adjacency_targets(graph, eval_rng);
  const VgaeLossWeights w{cfg.lambda_recon_exp, cfg.lambda_recon_sp, cfg.lambda_recon_adj, cfg.beta_kl};
  const ad::Tensor target(z_st.codes);
  const bool sq = cfg.squared_latent_loss;

  HistoryTable h{{"step", "total", "recon_exp", "recon_sp", "recon_adj", "kl", "l3"}, {}};
  auto snapshot = [&](Index step) {
    ad::NoGradGuard guard;
    const auto t = vgae.loss(graph.norm_adj, x, coords_n, eval_adj, Matrix::Zero(x.rows(), cfg.latent_dim), w);
    const double l3 = euclidean_latent_loss(t.posterior.mu, target, sq).item();
    h.rows.push_back({static_cast<double>(step), t.total.item() + cfg.lambda_l3 * l3, t.recon_exp.item(),
                      t.recon_sp.item(), t.recon_adj.item(), t.kl.item(), l3});
  };
  with_step_report("stage 3", 0, [&] { snapshot(0); });
  for (Index e = 1; e <= cfg.s3_epochs; ++e) {
    with_step_report("stage 3", e, [&] {
      const AdjacencyTargets adj = sample_adjacency_targets(graph, rng);
      const Matrix noise = rng.normal_matrix(x.rows(), cfg.latent_dim);
      const auto t = vgae.loss(graph.norm_adj, x, coords_n, adj, noise, w);
      ad::Tensor total = t.total;
      if (cfg.lambda_l3 > 0.0) {
        total = ad::add(total, ad::scale(euclidean_latent_loss(t.posterior.mu, target, sq), cfg.lambda_l3));
      }
      opt.zero_grad();
      ad::backward(total);
      opt.step();
      snapshot(e);
    });
  }
  LatentMatrix z{vgae.encode_mean(graph.norm_adj, x), LatentSource::st_exp_sp500, true};
  return {std::move(vgae), transform, std::move(z), std::move(h)};
}

Inference infer(const Vae& vae2, const Vgae& vgae, const CoordinateTransform& transform, const Matrix& x) {
  if (x.cols() != vae2.architecture().input_dim) {
    throw DimensionError("infer: expected " + std::to_string(vae2.architecture().input_dim) + " panel genes, got " +
                         std::to_string(x.cols()));
  }
  if (vae2.architecture().latent_dim != vgae.architecture().latent_dim) {
    throw DimensionError("infer: vae and vgae latent widths differ");
  }
  Inference r;
  if (x.rows() == 0) {
    r.expression = Matrix(0, vgae.architecture().input_dim);
    r.coords_model = Matrix(0, 2);
    r.coords = Matrix(0, 2);
    return r;
  }
  ad::NoGradGuard guard;
  const ad::Tensor z(vae2.encode_mean(x));
  r.expression = vgae.decode_expression(z).value();
  r.coords_model = vgae.decode_coords(z).value();
  r.coords = transform.denormalize(r.coords_model);
  return r;
}

CountMatrix align_to_panel(const CountMatrix& m, const std::vector<std::string>& panel, bool allow_extra) {
  const std::set<std::string> have(m.col_ids().begin(), m.col_ids().end());
  const std::set<std::string> want(panel.begin(), panel.end());
  std::vector<std::string> missing;
  std::vector<std::string> extra;
  for (const auto& g : panel) {
    if (!have.count(g)) missing.push_back(g);
  }
  for (const auto& g : m.col_ids()) {
    if (!want.count(g)) extra.push_back(g);
  }
  if (!missing.empty() || (!extra.empty() && !allow_extra)) {
    auto list = [](const std::vector<std::string>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size() && i < 20; ++i) s += (i ? ", " : "") + v[i];
      if (v.size() > 20) s += ", ... (" + std::to_string(v.size()) + " total)";
      return s;
    };
    std::string msg = "query genes do not match the shared panel;";
    if (!missing.empty()) msg += " missing: " + list(missing) + ";";
    if (!extra.empty() && !allow_extra) msg += " extra: " + list(extra) + ";";
    throw DataError(msg);
  }
  return m.select_cols(std::span<const std::string>(panel));
}

nlohmann::ordered_json transform_to_json(const CoordinateTransform& t) {
  nlohmann::ordered_json j;
  j["center_x"] = t.center_x;
  j["center_y"] = t.center_y;
  j["scale"] = t.scale;
  return j;
}

CoordinateTransform transform_from_json(const nlohmann::ordered_json& j) {
  CoordinateTransform t;
  t.center_x = j.at("center_x").get<double>();
  t.center_y = j.at("center_y").get<double>();
  t.scale = j.at("scale").get<double>();
  return t;
}

}  // namespace latmap
