// Acceptance run: one PASS/FAIL line per criterion, then a summary.
// Usage: latmap_acceptance <work-dir> [--strict]
// With --strict the exit status is 1 when any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "latmap/benchmark.hpp"
#include "latmap/commands.hpp"
#include "latmap/discriminator.hpp"
#include "latmap/graph.hpp"
#include "latmap/matrix_io.hpp"
#include "latmap/pipeline.hpp"
#include "latmap/preprocess.hpp"
#include "latmap/synth.hpp"
#include "latmap/vae.hpp"
#include "latmap/vgae.hpp"
#include "oracles.hpp"

#ifndef LATMAP_CLI
#error "LATMAP_CLI must name the command-line binary"
#endif

using namespace latmap;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

fs::path g_work;

double cli(const std::string& args) {
  const auto t0 = Clock::now();
  const std::string cmd = "cd '" + g_work.string() + "' && '" + LATMAP_CLI + "' " + args + " >> cli.log 2>&1";
  const int status = std::system(cmd.c_str());
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw std::runtime_error("latmap " + args + " failed, see " + (g_work / "cli.log").string());
  }
  return seconds_since(t0);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---- 1-3, 5, 8, 11: self-contained ---------------------------------------

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  const auto entries = gradcheck_suite(42);
  const double secs = seconds_since(t0);
  bool ok = secs < 60.0;
  std::string d;
  for (const auto& e : entries) {
    ok = ok && e.result.max_rel_error < 1e-4;
    d += e.network + " " + fmt(e.result.max_rel_error) + ", ";
  }
  return {ok && entries.size() == 3, d + fmt(secs) + " s"};
}

Outcome kl_correctness() {
  const ad::Tensor z(Matrix::Zero(1, 3));
  const double k0 = kl_divergence(z, z).item();
  const double k1 = kl_divergence(ad::Tensor(Matrix::Ones(1, 1)), ad::Tensor(Matrix::Zero(1, 1))).item();
  Rng rng(7);
  double lowest = 1e300;
  for (int i = 0; i < 10000; ++i) {
    const Matrix mu = 3.0 * rng.normal_matrix(1, 4);
    const Matrix lv = 2.0 * rng.normal_matrix(1, 4);
    lowest = std::min(lowest, kl_divergence(ad::Tensor(mu), ad::Tensor(lv)).item());
  }
  return {k0 == 0.0 && std::abs(k1 - 0.5) <= 1e-12 && lowest >= 0.0,
          "kl(0,0)=" + fmt(k0) + ", kl(1,0)-0.5=" + fmt(k1 - 0.5) + ", min over 1e4 draws " + fmt(lowest)};
}

Outcome benchmark_oracles() {
  Rng rng(3);
  int mismatches = 0;
  double worst_ari = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = static_cast<Index>(rng.uniform_int(10, 200));
    const int classes = static_cast<int>(rng.uniform_int(2, 5));
    std::vector<int> y(static_cast<std::size_t>(n)), yh(static_cast<std::size_t>(n));
    for (auto& v : y) v = static_cast<int>(rng.uniform_int(0, classes - 1));
    for (auto& v : yh) v = static_cast<int>(rng.uniform_int(0, classes - 1));
    mismatches += accuracy(y, yh) != oracle::accuracy(y, yh);
    const auto c = confusion_matrix(y, yh, classes);
    const auto o = oracle::confusion(y, yh, classes);
    for (int a = 0; a < classes; ++a) {
      for (int b = 0; b < classes; ++b) mismatches += c(a, b) != o[a][b];
    }
    const Matrix train = rng.normal_matrix(n, 3);
    const Matrix q = rng.normal_matrix(40, 3);
    const int k = static_cast<int>(rng.uniform_int(1, 9));
    mismatches += knn_predict(train, y, classes, q, k) != oracle::knn(train, y, classes, q, k);
    const std::size_t m = std::min<std::size_t>(50, y.size());
    const std::vector<int> ya(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(m));
    const std::vector<int> yb(yh.begin(), yh.begin() + static_cast<std::ptrdiff_t>(m));
    worst_ari = std::max(worst_ari, std::abs(ari(ya, yb) - oracle::ari(ya, yb)));
  }
  return {mismatches == 0 && worst_ari <= 1e-12,
          std::to_string(mismatches) + " count mismatches, max ARI gap " + fmt(worst_ari)};
}

Outcome discriminator_power() {
  const auto t0 = Clock::now();
  Rng rng(5);
  const Matrix sc = (0.5 * rng.normal_matrix(1000, 10)).array() + 3.0;
  const Matrix st = (0.5 * rng.normal_matrix(1000, 10)).array() - 3.0;
  Rng init = rng.derive("disc");
  Discriminator d(10, init);
  Adam opt(d.parameters());
  const auto r = train_discriminator(d, opt, sc, st, 0.95, 10);
  const double secs = seconds_since(t0);
  return {r.accuracy >= 0.95 && r.steps <= 10 && secs < 30.0,
          "accuracy " + fmt(r.accuracy) + " after " + std::to_string(r.steps) + " epochs, " + fmt(secs) + " s"};
}

Outcome graph_fidelity() {
  const auto t0 = Clock::now();
  // Two 5 x 10 spot blocks with a gap between them. Each block has its own expression program, and
  // every gene also carries a smooth spatial wave, so neighbouring spots look alike.
  const Index n = 100, genes = 30;
  Matrix xy(n, 2);
  Matrix x(n, genes);
  Rng rng(8);
  for (Index i = 0; i < n; ++i) {
    const Index block = i / 50, j = i % 50;
    xy.row(i) << static_cast<double>(j % 5) + 20.0 * static_cast<double>(block), static_cast<double>(j / 5);
    for (Index g = 0; g < genes; ++g) {
      const double gd = static_cast<double>(g);
      const double wave = std::sin(0.7 * (xy(i, 0) * std::cos(gd) + xy(i, 1) * std::sin(gd)) + gd);
      x(i, g) = ((g < genes / 2) == (block == 0) ? 2.0 : 0.5) + 2.0 * wave + 0.2 * rng.normal();
    }
  }
  const SpatialGraph full = build_knn_graph(xy, 6);

  Rng split = rng.derive("split");
  std::vector<Index> order(full.edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
  split.shuffle(order);
  const std::size_t n_test = order.size() / 10;
  std::vector<std::pair<Index, Index>> train_edges, test_edges;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_test ? test_edges : train_edges).push_back(full.edges[static_cast<std::size_t>(order[i])]);
  }
  const SpatialGraph g = graph_from_edges(n, train_edges);
  const CoordinateTransform tr = CoordinateTransform::fit(xy);
  const Matrix coords = tr.normalize(xy);

  VgaeArchitecture arch;
  arch.input_dim = genes;
  Rng init = rng.derive("vgae");
  Vgae vgae(arch, init);
  Adam opt(vgae.parameters(), {.lr = 1e-3});
  Rng epoch_rng = rng.derive("epochs");
  for (int e = 0; e < 300; ++e) {
    const auto targets = sample_adjacency_targets(g, epoch_rng);
    opt.zero_grad();
    ad::backward(vgae.loss(g.norm_adj, x, coords, targets, epoch_rng.normal_matrix(n, arch.latent_dim), {}).total);
    opt.step();
  }
  const Matrix z = vgae.encode_mean(g.norm_adj, x);
  std::set<std::pair<Index, Index>> all(full.edges.begin(), full.edges.end());
  std::vector<double> pos, neg;
  for (const auto& [i, j] : test_edges) pos.push_back(z.row(i).dot(z.row(j)));
  Rng neg_rng = rng.derive("negatives");
  while (neg.size() < pos.size()) {
    const Index i = neg_rng.uniform_int(0, n - 1), j = neg_rng.uniform_int(0, n - 1);
    if (i == j || all.contains({std::min(i, j), std::max(i, j)})) continue;
    neg.push_back(z.row(i).dot(z.row(j)));
  }
  const double auc = oracle::auc(pos, neg);
  const double secs = seconds_since(t0);
  return {auc >= 0.9 && secs < 120.0, "held-out edge AUC " + fmt(auc) + " over " + std::to_string(pos.size()) +
                                           " edges, " + fmt(secs) + " s"};
}

Outcome preprocessing_contract() {
  // Cell 0 expresses 199 genes, cell 1 exactly 200; gene 0 is seen in 59 cells, gene 1 in 60.
  MatrixX<std::int64_t> cells = MatrixX<std::int64_t>::Zero(2, 250);
  cells.row(0).head(199).setConstant(1);
  cells.row(1).head(200).setConstant(1);
  std::vector<std::string> genes;
  for (int g = 0; g < 250; ++g) genes.push_back("g" + std::to_string(g));
  const auto kept_cells = filter_cells(CountMatrix::from_dense({"c199", "c200"}, genes, cells), 200);

  MatrixX<std::int64_t> g2 = MatrixX<std::int64_t>::Zero(80, 3);
  g2.col(0).head(59).setConstant(2);
  g2.col(1).head(60).setConstant(2);
  g2.col(2).setConstant(2);
  std::vector<std::string> rows;
  for (int r = 0; r < 80; ++r) rows.push_back("c" + std::to_string(r));
  const auto kept_genes = filter_genes(CountMatrix::from_dense(rows, {"g59", "g60", "g80"}, g2), 60);

  const bool ok = kept_cells.row_ids() == std::vector<std::string>{"c200"} &&
                  kept_genes.col_ids() == std::vector<std::string>{"g60", "g80"};
  return {ok, "cells kept " + std::to_string(kept_cells.rows()) + "/2, genes kept " +
                  std::to_string(kept_genes.cols()) + "/3"};
}

// ---- 4, 6, 7, 9, 10: one synthetic run through the CLI --------------------

struct RunTimes {
  double stage[4] = {0, 0, 0, 0};
  double infer = 0;
};

RunTimes g_times;

void prepare_run() {
  fs::remove_all(g_work);
  fs::create_directories(g_work);
  cli("synth --out synth");
  cli("--run-dir run preprocess --sc synth/sc_counts.csv --st synth/st_counts.csv --coords synth/st_coords.csv");
  fs::copy(g_work / "run" / "data", g_work / "data", fs::copy_options::recursive);
  for (int s = 1; s <= 3; ++s) g_times.stage[s] = cli("--run-dir run train --stage " + std::to_string(s));
  g_times.infer = cli("--run-dir run infer --counts synth/sc_query_counts.csv --allow-extra-genes");
}

std::vector<std::string> truth_for(const std::vector<std::string>& ids) {
  const auto t = read_label_csv(g_work / "synth" / "truth_labels.csv");
  std::map<std::string, std::string> m;
  for (std::size_t i = 0; i < t.ids.size(); ++i) m[t.ids[i]] = t.labels[i];
  std::vector<std::string> out;
  for (const auto& id : ids) out.push_back(m.at(id));
  return out;
}

Outcome stage1_quality() {
  const auto z = read_real_csv(g_work / "run" / "latents" / "z_sc2000.csv");
  const auto r = kfold_cv(LabeledEmbedding::from_strings(z.values, truth_for(z.row_ids)), 4, 4, 42);
  return {r.mean >= 0.9 && g_times.stage[1] < 300.0 && z.values.cols() == 10,
          "4-fold kNN accuracy " + fmt(r.mean) + ", stage 1 took " + fmt(g_times.stage[1]) + " s"};
}

Outcome alignment_effect() {
  const auto t0 = Clock::now();
  const fs::path run = g_work / "run";
  const auto zsc = read_real_csv(run / "latents" / "z_sc500.csv").values;
  const auto zst = read_real_csv(run / "latents" / "z_st_exp500.csv").values;
  const double aligned = fresh_discriminator_accuracy(zsc, zst, 42);

  // λ_L2 = 0 ablation: same data, same fixed stage-1 codes.
  TrainConfig cfg = TrainConfig::from_json(nlohmann::ordered_json::parse(slurp(run / "config.json")));
  cfg.lambda_l2 = 0.0;
  const auto z1 = read_real_csv(run / "latents" / "z_sc2000.csv").values;
  const auto s2 = stage2(cfg, read_real_csv(run / "data" / "x_sc500.csv").values,
                         read_real_csv(run / "data" / "x_st500.csv").values, {z1, LatentSource::sc2000, true});
  const double ablation = fresh_discriminator_accuracy(s2.z_sc500.codes, s2.z_st_exp500.codes, 42);
  const double secs = seconds_since(t0) + g_times.stage[2];
  return {aligned <= 0.65 && ablation >= 0.90 && secs < 300.0,
          "fresh D held-out accuracy " + fmt(aligned) + " aligned, " + fmt(ablation) + " without L2, " + fmt(secs) +
              " s"};
}

double history_value(const fs::path& csv, const std::string& column, bool last) {
  std::ifstream in(csv);
  std::string header, line, final_line, first_line;
  std::getline(in, header);
  std::getline(in, first_line);
  final_line = first_line;
  while (std::getline(in, line)) {
    if (!line.empty()) final_line = line;
  }
  const auto cols = split_csv_line(header);
  const auto vals = split_csv_line(last ? final_line : first_line);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] == column) return std::stod(vals.at(i));
  }
  throw std::runtime_error("no column " + column + " in " + csv.string());
}

Outcome latent_convergence() {
  const fs::path h = g_work / "run" / "history";
  const double l1a = history_value(h / "stage2.csv", "l1", false), l1b = history_value(h / "stage2.csv", "l1", true);
  const double l3a = history_value(h / "stage3.csv", "l3", false), l3b = history_value(h / "stage3.csv", "l3", true);
  return {l1b <= 0.5 * l1a && l3b <= 0.7 * l3a,
          "L1 " + fmt(l1a) + " -> " + fmt(l1b) + ", L3 " + fmt(l3a) + " -> " + fmt(l3b)};
}

Outcome end_to_end() {
  const auto pred = read_real_csv(g_work / "run" / "predictions.csv");
  const auto regions = read_regions(g_work / "synth" / "regions.csv");
  const auto truth = truth_for(pred.row_ids);
  const auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < pred.col_ids.size(); ++i) {
      if (pred.col_ids[i] == name) return static_cast<Index>(i);
    }
    throw std::runtime_error("predictions lack column " + name);
  };
  const Index cx = col("x_hat"), cy = col("y_hat");
  Index hits = 0;
  for (Index i = 0; i < pred.values.rows(); ++i) {
    const std::string& t = truth[static_cast<std::size_t>(i)];
    int label = -1;
    for (int k = 0; k < static_cast<int>(regions.size()); ++k) {
      if (type_name(k) == t) label = k;
    }
    hits += in_region(regions, label, pred.values(i, cx), pred.values(i, cy));
  }
  const double share = static_cast<double>(hits) / static_cast<double>(pred.values.rows());
  const double secs = g_times.stage[1] + g_times.stage[2] + g_times.stage[3] + g_times.infer;
  return {share >= 0.7 && secs < 600.0, std::to_string(hits) + "/" + std::to_string(pred.values.rows()) +
                                            " held-out cells in their quadrant (" + fmt(share) + "), train+infer " +
                                            fmt(secs) + " s"};
}

Outcome determinism() {
  fs::create_directories(g_work / "run2");
  fs::copy_file(g_work / "run" / "config.json", g_work / "run2" / "config.json");
  cli("--run-dir run2 train --stage all --data data");
  int same = 0, total = 0;
  for (const char* dir : {"history", "latents"}) {
    for (const auto& e : fs::directory_iterator(g_work / "run" / dir)) {
      ++total;
      same += slurp(e.path()) == slurp(g_work / "run2" / dir / e.path().filename());
    }
  }
  return {total > 0 && same == total, std::to_string(same) + "/" + std::to_string(total) + " files identical"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: latmap_acceptance <work-dir> [--strict]\n";
    return 2;
  }
  g_work = fs::absolute(argv[1]);
  const bool strict = argc > 2 && std::string(argv[2]) == "--strict";

  bool run_ready = false;
  std::string run_error;
  auto needs_run = [&](std::function<Outcome()> f) {
    return [&, f]() -> Outcome {
      if (!run_ready) return {false, "synthetic run unavailable: " + run_error};
      return f();
    };
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradient_integrity},
      {"KL correctness", kl_correctness},
      {"benchmark oracle equivalence", benchmark_oracles},
      {"stage-1 latent quality", needs_run(stage1_quality)},
      {"discriminator power", discriminator_power},
      {"adversarial alignment effect", needs_run(alignment_effect)},
      {"L1/L3 convergence", needs_run(latent_convergence)},
      {"VGAE graph fidelity", graph_fidelity},
      {"end-to-end inference", needs_run(end_to_end)},
      {"determinism", needs_run(determinism)},
      {"preprocessing contract", preprocessing_contract},
  };

  try {
    prepare_run();
    run_ready = true;
  } catch (const std::exception& e) {
    run_error = e.what();
  }

  int failed = 0;
  std::ostringstream report;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::ostringstream line;
    line << "criterion " << (i + 1) << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": "
         << o.detail << "\n";
    std::cout << line.str() << std::flush;
    report << line.str();
  }
  const std::string summary = std::to_string(criteria.size() - static_cast<std::size_t>(failed)) + "/" +
                              std::to_string(criteria.size()) + " criteria passed\n";
  std::cout << summary << std::flush;
  report << summary;
  // ctest hides the output of passing tests, so keep a copy next to the run.
  fs::create_directories(g_work);
  std::ofstream(g_work / "acceptance_report.txt") << report.str();
  return strict && failed > 0 ? 1 : 0;
}
