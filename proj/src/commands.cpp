#include "latmap/commands.hpp"

#include <chrono>
#include <fstream>
#include <map>

#include "latmap/benchmark.hpp"
#include "latmap/digest.hpp"
#include "latmap/errors.hpp"
#include "latmap/matrix_io.hpp"
#include "latmap/preprocess.hpp"
#include "latmap/run_dir.hpp"

namespace latmap {

TrainConfig resolve_config(const GlobalOptions& g) {
  TrainConfig c;
  if (!g.config.empty()) {
    if (!fs::exists(g.config)) throw DataError("config file " + g.config.string() + " not found");
    c = TrainConfig::from_json(read_json(g.config));
  }
  for (const auto& s : g.sets) c.set(s);
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

CountMatrix read_counts(const fs::path& path, const fs::path& rows, const fs::path& cols, bool transpose) {
  if (path.extension() == ".mtx") {
    auto sidecar = [&](const fs::path& given, const char* ext) {
      if (!given.empty()) return given;
      fs::path p = path;
      return p.replace_extension(ext);
    };
    return read_matrix_market(path, sidecar(rows, ".rows.txt"), sidecar(cols, ".cols.txt"), transpose);
  }
  return read_count_csv(path);
}

namespace {

template <typename T>
nlohmann::ordered_json json_list(const std::vector<T>& v) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& x : v) j.push_back(x);
  return j;
}

std::vector<Index> column_indices(const std::vector<std::string>& ids, const std::vector<std::string>& wanted) {
  std::map<std::string, Index> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = static_cast<Index>(i);
  std::vector<Index> out;
  for (const auto& w : wanted) out.push_back(pos.at(w));
  return out;
}

Matrix select_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = m.col(cols[c]);
  return out;
}

}  // namespace

int cmd_preprocess(const GlobalOptions& g, const PreprocessOptions& o, std::ostream& log) {
  if (o.sc.empty() || o.st.empty() || o.coords.empty()) {
    throw std::invalid_argument("preprocess needs --sc, --st and --coords");
  }
  const RunLayout layout(g.run_dir, o.out);
  fs::create_directories(layout.data);

  const CountMatrix sc_raw = read_counts(o.sc, o.sc_rows, o.sc_cols, o.sc_transpose);
  const CountMatrix st_raw = read_counts(o.st, o.st_rows, o.st_cols, o.st_transpose);
  const LabeledMatrix coords_raw = read_coords_csv(o.coords);

  QcOptions qc;
  qc.min_genes = o.min_genes;
  qc.min_cells = o.min_cells;
  qc.mito_ribo.max_fraction = o.max_mito_ribo;
  QcSummary summary;
  const CountMatrix sc = run_qc(sc_raw, qc, &summary);

  // Spots are not QC-filtered, but a spot without counts cannot be normalized.
  std::vector<Index> keep_spots;
  const auto st_totals = st_raw.row_totals();
  for (Index i = 0; i < st_raw.rows(); ++i) {
    if (st_totals[static_cast<std::size_t>(i)] > 0) keep_spots.push_back(i);
  }
  const Index st_dropped = st_raw.rows() - static_cast<Index>(keep_spots.size());
  if (keep_spots.empty()) throw DataError("all spots have zero counts");
  const CountMatrix st = st_raw.select_rows(keep_spots);

  std::map<std::string, Index> coord_row;
  for (std::size_t i = 0; i < coords_raw.row_ids.size(); ++i) coord_row[coords_raw.row_ids[i]] = static_cast<Index>(i);
  Matrix coords(st.rows(), 2);
  std::vector<std::string> missing;
  for (Index i = 0; i < st.rows(); ++i) {
    const auto it = coord_row.find(st.row_ids()[static_cast<std::size_t>(i)]);
    if (it == coord_row.end()) {
      missing.push_back(st.row_ids()[static_cast<std::size_t>(i)]);
      continue;
    }
    coords.row(i) = coords_raw.values.row(it->second);
  }
  if (!missing.empty()) {
    std::string msg = "no coordinates for " + std::to_string(missing.size()) + " spots, e.g. " + missing.front();
    throw DataError(msg);
  }

  const Matrix sc_norm = normalize_log1p(sc, o.target_sum);
  const GenePanel hvg = select_hvg(sc_norm, sc.col_ids(), o.n_hvg);
  const GenePanel shared = intersect_panel(sc, st, o.n_shared, o.target_sum);

  LabeledMatrix x2000{sc.row_ids(), hvg.genes, select_columns(sc_norm, column_indices(sc.col_ids(), hvg.genes))};
  const CountMatrix sc_panel = sc.select_cols(std::span<const std::string>(shared.genes));
  const CountMatrix st_panel = st.select_cols(std::span<const std::string>(shared.genes));
  LabeledMatrix x_sc500{sc.row_ids(), shared.genes, normalize_log1p(sc_panel, o.target_sum)};
  LabeledMatrix x_st500{st.row_ids(), shared.genes, normalize_log1p(st_panel, o.target_sum)};

  write_real_csv(layout.x_sc2000(), x2000, "cell_id");
  write_real_csv(layout.x_sc500(), x_sc500, "cell_id");
  write_real_csv(layout.x_st500(), x_st500, "spot_id");
  write_coords_csv(layout.st_coords(), st.row_ids(), coords);
  write_lines(layout.panel_hvg(), hvg.genes);
  write_lines(layout.panel_shared(), shared.genes);

  nlohmann::ordered_json s;
  s["sc_cells_in"] = summary.rows_in;
  s["sc_genes_in"] = summary.cols_in;
  s["dropped_by_min_genes"] = summary.dropped_by_min_genes;
  s["dropped_by_min_cells"] = summary.dropped_by_min_cells;
  s["dropped_by_mito_ribo"] = summary.dropped_by_mito_ribo;
  s["sc_cells_kept"] = sc.rows();
  s["sc_genes_kept"] = sc.cols();
  s["st_spots_in"] = st_raw.rows();
  s["st_spots_dropped_zero_total"] = st_dropped;
  s["min_genes"] = o.min_genes;
  s["min_cells"] = o.min_cells;
  s["max_mito_ribo"] = o.max_mito_ribo;
  s["target_sum"] = o.target_sum;
  s["n_hvg"] = o.n_hvg;
  s["n_shared"] = o.n_shared;
  s["warnings"] = json_list(summary.warnings);
  write_json_atomic(layout.preprocess_summary(), s);

  log << "sc: " << summary.rows_in << " cells x " << summary.cols_in << " genes -> " << sc.rows() << " x " << sc.cols()
      << " (min_genes dropped " << summary.dropped_by_min_genes << ", min_cells dropped "
      << summary.dropped_by_min_cells << ", mito/ribo dropped " << summary.dropped_by_mito_ribo << ")\n";
  log << "st: " << st.rows() << " spots x " << st.cols() << " genes (" << st_dropped << " empty spots dropped)\n";
  for (const auto& w : summary.warnings) log << "warning: " << w << "\n";
  log << "wrote " << layout.data.string() << "\n";
  return kExitOk;
}

int cmd_synth(const GlobalOptions& g, const SynthOptions& o, std::ostream& log) {
  SynthConfig cfg = o.config;
  if (g.seed) cfg.seed = *g.seed;
  const auto files = write_synth(o.out, cfg, o.mtx);
  for (const auto& p : {files.sc_counts, files.sc_query_counts, files.st_counts, files.st_coords, files.truth_labels,
                        files.regions, files.config}) {
    log << file_digest(p) << "  " << p.string() << "\n";
  }
  return kExitOk;
}

namespace {

std::vector<fs::path> stage_artifacts(const RunLayout& L, int stage) {
  switch (stage) {
    case 1:
      return {L.checkpoint("vae1"), L.latent("z_sc2000"), L.history(1)};
    case 2:
      return {L.checkpoint("vae2"), L.checkpoint("vae3"), L.checkpoint("disc"), L.latent("z_sc500"),
              L.latent("z_st_exp500"), L.history(2)};
    default:
      return {L.checkpoint("vgae"), L.transform(), L.latent("z_st_exp_sp500"), L.history(3)};
  }
}

/// The fixed latent whose presence marks a stage as done.
fs::path stage_marker(const RunLayout& L, int stage) {
  return stage == 1 ? L.latent("z_sc2000") : stage == 2 ? L.latent("z_st_exp500") : L.latent("z_st_exp_sp500");
}

void require(const RunLayout& L, const fs::path& p, int stage, const char* hint) {
  if (!fs::exists(p)) {
    throw DependencyError("stage " + std::to_string(stage) + " requires " + L.relative(p) + " (" + hint + ")");
  }
}

Checkpoint stamped(Checkpoint c, const TrainConfig& cfg) {
  c.config_hash = hex_digest(fnv1a64(cfg.to_json().dump()));
  return c;
}

struct TrainContext {
  const RunLayout& L;
  const TrainConfig& cfg;
  RunManifest& manifest;
  bool force;
  std::ostream& log;

  void save_manifest() { write_json_atomic(L.manifest(), manifest.to_json()); }

  void begin(int stage) {
    const fs::path marker = stage_marker(L, stage);
    if (fs::exists(marker) && !force) {
      throw DependencyError(L.relative(marker) + " already exists; pass --force to retrain stage " +
                            std::to_string(stage));
    }
    for (int s = stage; s <= 3; ++s) {
      for (const auto& p : stage_artifacts(L, s)) {
        fs::remove(p);
        const auto rel = L.relative(p);
        std::erase(manifest.artifacts, rel);
      }
      std::erase(manifest.stages_completed, s);
    }
    fs::create_directories(L.root / "checkpoints");
    fs::create_directories(L.root / "latents");
    fs::create_directories(L.root / "history");
  }

  void input(const fs::path& p) {
    const auto key = L.relative(p);
    if (force) manifest.inputs.erase(key);
    track_input(manifest, key, p);
  }

  void finish(int stage) {
    for (const auto& p : stage_artifacts(L, stage)) manifest.add_artifact(L.relative(p));
    manifest.mark_stage(stage);
    save_manifest();
  }
};

void run_stage1(TrainContext& t) {
  const auto& L = t.L;
  require(L, L.x_sc2000(), 1, "run preprocess first");
  t.begin(1);
  t.input(L.x_sc2000());
  const auto x = read_real_csv(L.x_sc2000());
  auto r = stage1(t.cfg, x.values);
  save_checkpoint(L.checkpoint("vae1"), stamped(r.vae1.to_checkpoint(), t.cfg));
  write_latent(L.latent("z_sc2000"), x.row_ids, r.z_sc2000);
  r.history.write_csv(L.history(1));
  t.log << "stage 1: recon " << r.history.first("recon") << " -> " << r.history.last("recon") << "\n";
  t.finish(1);
}

void run_stage2(TrainContext& t) {
  const auto& L = t.L;
  require(L, L.latent("z_sc2000"), 2, "run --stage 1 first");
  require(L, L.x_sc500(), 2, "run preprocess first");
  require(L, L.x_st500(), 2, "run preprocess first");
  t.begin(2);
  t.input(L.x_sc500());
  t.input(L.x_st500());
  const auto x_sc = read_real_csv(L.x_sc500());
  const auto x_st = read_real_csv(L.x_st500());
  std::vector<std::string> z_ids;
  const LatentMatrix z = read_latent(L.latent("z_sc2000"), LatentSource::sc2000, &z_ids);
  if (z_ids != x_sc.row_ids) throw DataError("z_sc2000 rows do not match the cells of x_sc500");
  auto r = stage2(t.cfg, x_sc.values, x_st.values, z);
  save_checkpoint(L.checkpoint("vae2"), stamped(r.vae2.to_checkpoint(), t.cfg));
  save_checkpoint(L.checkpoint("vae3"), stamped(r.vae3.to_checkpoint(), t.cfg));
  save_checkpoint(L.checkpoint("disc"), stamped(r.disc.to_checkpoint(), t.cfg));
  write_latent(L.latent("z_sc500"), x_sc.row_ids, r.z_sc500);
  write_latent(L.latent("z_st_exp500"), x_st.row_ids, r.z_st_exp500);
  r.history.write_csv(L.history(2));
  t.log << "stage 2: L1 " << r.history.first("l1") << " -> " << r.history.last("l1") << ", discriminator accuracy "
        << r.history.last("disc_accuracy") << "\n";
  t.finish(2);
}

void run_stage3(TrainContext& t) {
  const auto& L = t.L;
  require(L, L.latent("z_st_exp500"), 3, "run --stage 2 first");
  require(L, L.x_st500(), 3, "run preprocess first");
  require(L, L.st_coords(), 3, "run preprocess first");
  t.begin(3);
  t.input(L.x_st500());
  t.input(L.st_coords());
  const auto x = read_real_csv(L.x_st500());
  const auto coords = read_coords_csv(L.st_coords());
  if (coords.row_ids != x.row_ids) throw DataError("st_coords.csv rows do not match the spots of x_st500");
  std::vector<std::string> z_ids;
  const LatentMatrix z = read_latent(L.latent("z_st_exp500"), LatentSource::st_exp500, &z_ids);
  if (z_ids != x.row_ids) throw DataError("z_st_exp500 rows do not match the spots of x_st500");
  auto r = stage3(t.cfg, x.values, coords.values, z);
  save_checkpoint(L.checkpoint("vgae"), stamped(r.vgae.to_checkpoint(), t.cfg));
  write_json_atomic(L.transform(), transform_to_json(r.transform));
  write_latent(L.latent("z_st_exp_sp500"), x.row_ids, r.z_st_exp_sp);
  r.history.write_csv(L.history(3));
  t.log << "stage 3: L3 " << r.history.first("l3") << " -> " << r.history.last("l3") << "\n";
  t.finish(3);
}

}  // namespace

int cmd_train(const GlobalOptions& g, const TrainOptions& o, std::ostream& log) {
  std::vector<int> stages;
  if (o.stage == "all") {
    stages = {1, 2, 3};
  } else if (o.stage == "1" || o.stage == "2" || o.stage == "3") {
    stages = {o.stage[0] - '0'};
  } else {
    throw std::invalid_argument("--stage must be 1, 2, 3 or all");
  }
  const RunLayout L(g.run_dir, o.data);
  fs::create_directories(L.root);
  RunLock lock(L.lock());

  TrainConfig cfg;
  const bool overrides = !g.config.empty() || !g.sets.empty() || g.seed.has_value();
  if (fs::exists(L.config())) {
    cfg = TrainConfig::from_json(read_json(L.config()));
    if (overrides) {
      const TrainConfig requested = resolve_config(g);
      if (!(requested == cfg)) {
        if (!g.force) {
          throw DependencyError("requested config differs from " + L.relative(L.config()) +
                                "; pass --force to replace it");
        }
        cfg = requested;
        write_json_atomic(L.config(), cfg.to_json());
      }
    }
  } else {
    cfg = resolve_config(g);
    write_json_atomic(L.config(), cfg.to_json());
  }
  cfg.validate();

  RunManifest manifest;
  if (fs::exists(L.manifest())) manifest = RunManifest::from_json(read_json(L.manifest()));
  manifest.tool_version = kToolVersion;
  manifest.seed = cfg.seed;
  manifest.config = cfg.to_json();
  TrainContext ctx{L, cfg, manifest, g.force, log};
  ctx.save_manifest();

  for (int s : stages) {
    if (s == 1) run_stage1(ctx);
    if (s == 2) run_stage2(ctx);
    if (s == 3) run_stage3(ctx);
  }
  return kExitOk;
}

int cmd_infer(const GlobalOptions& g, const InferOptions& o, std::ostream& log) {
  if (o.counts.empty()) throw std::invalid_argument("infer needs --counts");
  const RunLayout L(g.run_dir, o.data);
  for (const auto& p : {L.checkpoint("vae2"), L.checkpoint("vgae"), L.transform(), L.panel_shared()}) {
    if (!fs::exists(p)) throw DependencyError("infer requires " + L.relative(p) + " (complete all three stages)");
  }
  RunLock lock(L.lock());
  const Vae vae2 = Vae::from_checkpoint(load_checkpoint(L.checkpoint("vae2")));
  const Vgae vgae = Vgae::from_checkpoint(load_checkpoint(L.checkpoint("vgae")));
  const CoordinateTransform tr = transform_from_json(read_json(L.transform()));
  const auto panel = read_lines(L.panel_shared());
  double target_sum = 1e4;
  if (fs::exists(L.preprocess_summary())) target_sum = read_json(L.preprocess_summary()).value("target_sum", 1e4);

  const CountMatrix counts = align_to_panel(read_counts(o.counts, o.rows, o.cols, o.transpose), panel,
                                            o.allow_extra_genes);
  const Inference r = infer(vae2, vgae, tr, normalize_log1p(counts, target_sum));

  LabeledMatrix out{counts.row_ids(), {"x_hat", "y_hat"}, Matrix(counts.rows(), 2 + r.expression.cols())};
  out.col_ids.insert(out.col_ids.end(), panel.begin(), panel.end());
  out.values.leftCols(2) = r.coords;
  out.values.rightCols(r.expression.cols()) = r.expression;
  const fs::path path = o.out.empty() ? L.root / "predictions.csv" : o.out;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_real_csv(path, out, "cell_id");
  log << "coordinate transform: x = " << format_double(tr.scale) << " * x_model + " << format_double(tr.center_x)
      << ", y = " << format_double(tr.scale) << " * y_model + " << format_double(tr.center_y) << "\n";
  log << "wrote " << counts.rows() << " predictions to " << path.string() << "\n";
  return kExitOk;
}

int cmd_bench(const GlobalOptions& g, const BenchOptions& o, std::ostream& log) {
  if (o.latents.empty() || o.labels.empty()) throw std::invalid_argument("bench needs --latents and --labels");
  if (o.folds < 2) throw std::invalid_argument("--folds must be >= 2");
  const std::uint64_t seed = g.seed.value_or(42);
  const LabeledMatrix z = read_real_csv(o.latents);
  const LabelTable table = read_label_csv(o.labels);
  std::map<std::string, std::string> label_of;
  for (std::size_t i = 0; i < table.ids.size(); ++i) label_of[table.ids[i]] = table.labels[i];
  std::vector<std::string> labels;
  std::vector<std::string> unmatched;
  for (const auto& id : z.row_ids) {
    const auto it = label_of.find(id);
    if (it == label_of.end()) {
      unmatched.push_back(id);
    } else {
      labels.push_back(it->second);
    }
  }
  if (!unmatched.empty()) {
    std::string msg = std::to_string(unmatched.size()) + " latent ids have no label:";
    for (std::size_t i = 0; i < unmatched.size() && i < 20; ++i) msg += " " + unmatched[i];
    throw DataError(msg);
  }
  const auto e = LabeledEmbedding::from_strings(z.values, labels);
  if (e.size() < o.folds) throw DataError("fewer rows than folds");
  const auto n_classes = static_cast<Index>(e.vocabulary.size());
  const Index k = o.k > 0 ? o.k : n_classes;
  const CvReport report = kfold_cv(e, k, o.folds, seed);
  const double ari_score = ari(e.labels, report.predictions);

  // Largest k every fold can support.
  const Index k_max = e.size() - (e.size() + o.folds - 1) / o.folds;
  std::vector<Index> ks;
  for (Index kk : o.ks.empty() ? default_k_values(n_classes) : o.ks) {
    if (kk >= 1 && kk <= k_max) ks.push_back(kk);
  }
  const auto sweep = ks.empty() ? std::vector<std::pair<Index, CvReport>>{} : sweep_k(e, ks, o.folds, seed);

  nlohmann::ordered_json j;
  j["n"] = e.size();
  j["dim"] = e.codes.cols();
  j["k"] = k;
  j["folds"] = o.folds;
  j["seed"] = seed;
  j["vocabulary"] = json_list(e.vocabulary);
  j["fold_accuracy"] = json_list(report.fold_accuracy);
  j["mean"] = report.mean;
  j["stddev"] = report.stddev;
  j["ari"] = ari_score;
  if (o.holdout) {
    const CvReport h = holdout_eval(e, k, *o.holdout, seed);
    j["holdout"] = {{"test_fraction", *o.holdout}, {"accuracy", h.mean}};
  }
  j["warnings"] = json_list(report.warnings);

  fs::create_directories(o.out);
  write_json_atomic(o.out / "report.json", j);
  {
    std::ofstream c(o.out / "confusion.csv");
    c << "true\\predicted";
    for (const auto& v : e.vocabulary) c << "," << v;
    c << "\n";
    for (Index i = 0; i < n_classes; ++i) {
      c << e.vocabulary[static_cast<std::size_t>(i)];
      for (Index jj = 0; jj < n_classes; ++jj) c << "," << report.confusion(i, jj);
      c << "\n";
    }
  }
  {
    std::ofstream a(o.out / "accuracy_vs_k.csv");
    a << "k,mean,stddev\n";
    for (const auto& [kk, r] : sweep) a << kk << "," << format_double(r.mean) << "," << format_double(r.stddev) << "\n";
  }
  log << "k=" << k << " folds=" << o.folds << " mean=" << format_double(report.mean)
      << " std=" << format_double(report.stddev) << " ari=" << format_double(ari_score) << "\n";
  for (const auto& w : report.warnings) log << "warning: " << w << "\n";
  return kExitOk;
}

std::vector<GradCheckEntry> gradcheck_suite(std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  // Evaluation points with a ReLU input closer than this to zero are redrawn:
  // a step of 1e-5 could cross the kink there.
  constexpr double kMargin = 1e-4;
  constexpr int kMaxDraws = 100;
  std::vector<GradCheckEntry> out;
  Rng rng = Rng(seed).derive("gradcheck");
  auto run = [&](const std::string& name, auto&& make_instance) {
    for (int draw = 1; draw <= kMaxDraws; ++draw) {
      auto [loss_fn, params] = make_instance();
      if (ad::relu_margin(loss_fn()) < kMargin && draw < kMaxDraws) continue;
      const auto t0 = clock::now();
      GradCheckEntry e{name, grad_check(loss_fn, params), 0.0, draw};
      e.seconds = std::chrono::duration<double>(clock::now() - t0).count();
      out.push_back(e);
      return;
    }
  };
  using Instance = std::pair<std::function<ad::Tensor()>, std::vector<ad::Tensor>>;

  run("vae", [&]() -> Instance {
    VaeArchitecture a;
    a.input_dim = 12;
    a.encoder_hidden = {16, 8};
    a.latent_dim = 4;
    a.decoder_hidden = {8, 16};
    auto vae = std::make_shared<Vae>(a, rng, "vae");
    const Matrix x = rng.normal_matrix(6, 12);
    const Matrix noise = rng.normal_matrix(6, 4);
    return {[vae, x, noise] { return vae->loss(ad::Tensor(x), noise, 1.0).total; }, vae->parameters()};
  });
  run("vgae", [&]() -> Instance {
    const Index n = 8;
    Matrix coords(n, 2);
    for (Index i = 0; i < n; ++i) coords.row(i) << rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0);
    const SpatialGraph graph = build_knn_graph(coords, 3);
    VgaeArchitecture a;
    a.input_dim = 12;
    a.latent_dim = 4;
    a.expr_hidden = {16, 8};
    a.gcn_hidden = 8;
    a.decoder_hidden = {8, 16};
    a.coord_hidden = {8};
    auto vgae = std::make_shared<Vgae>(a, rng);
    const Matrix x = rng.normal_matrix(n, 12);
    const Matrix noise = rng.normal_matrix(n, 4);
    const Matrix target = rng.normal_matrix(n, 4);
    const AdjacencyTargets adj = sample_adjacency_targets(graph, rng);
    const Matrix coords_n = CoordinateTransform::fit(coords).normalize(coords);
    return {[vgae, graph, x, noise, target, adj, coords_n] {
              const auto t = vgae->loss(graph.norm_adj, x, coords_n, adj, noise, VgaeLossWeights{});
              return ad::add(t.total, euclidean_latent_loss(t.posterior.mu, ad::Tensor(target)));
            },
            vgae->parameters()};
  });
  run("discriminator", [&]() -> Instance {
    auto d = std::make_shared<Discriminator>(4, rng, 16, 3);
    const Matrix z_sc = rng.normal_matrix(6, 4);
    const Matrix z_st = rng.normal_matrix(6, 4);
    ad::Tensor z_gen = ad::Tensor::parameter(rng.normal_matrix(6, 4), "z_gen");
    auto params = d->parameters();
    params.push_back(z_gen);
    return {[d, z_sc, z_st, z_gen] {
              return ad::add(discriminator_loss(*d, z_sc, z_st), adversarial_generator_loss(*d, z_gen, kScLabel));
            },
            params};
  });
  return out;
}

int cmd_gradcheck(const GlobalOptions& g, std::ostream& log) {
  bool ok = true;
  for (const auto& e : gradcheck_suite(g.seed.value_or(42))) {
    const bool pass = e.result.max_rel_error < 1e-4;
    ok = ok && pass;
    log << e.network << ": max relative error " << e.result.max_rel_error << " over " << e.result.entries_checked
        << " entries (worst " << e.result.worst_parameter << "[" << e.result.worst_index << "] analytic " << e.result.worst_analytic
        << " numeric " << e.result.worst_numeric << "), " << e.seconds
        << " s, draw " << e.draws << " " << (pass ? "ok" : "FAILED") << "\n";
  }
  return ok ? kExitOk : kExitNumeric;
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const DependencyError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDependency;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DomainError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::ordered_json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace latmap
