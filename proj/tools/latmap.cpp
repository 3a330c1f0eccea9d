// Command-line front end: preprocess, synth, train, infer, bench, gradcheck.

#include <iostream>

#include <CLI11.hpp>

#include "latmap/commands.hpp"

using namespace latmap;

int main(int argc, char** argv) {
  CLI::App app{"Latent mapping between single-cell and spatial expression data"};
  app.require_subcommand(1);

  GlobalOptions g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides the config)");
  app.add_option("--config", g.config, "JSON training config");
  app.add_option("--run-dir", g.run_dir, "Run directory")->capture_default_str();
  app.add_flag("--force", g.force, "Overwrite existing stage artifacts");
  app.add_option("--set", g.sets, "Config override key=value (repeatable)");

  PreprocessOptions pre;
  auto* c_pre = app.add_subcommand("preprocess", "QC, normalization, HVG and shared-panel selection");
  c_pre->add_option("--sc", pre.sc, "sc counts (.csv or .mtx)")->required();
  c_pre->add_option("--sc-rows", pre.sc_rows, "cell ids for .mtx input");
  c_pre->add_option("--sc-cols", pre.sc_cols, "gene ids for .mtx input");
  c_pre->add_flag("--sc-transpose", pre.sc_transpose, ".mtx stored genes x cells");
  c_pre->add_option("--st", pre.st, "spot counts (.csv or .mtx)")->required();
  c_pre->add_option("--st-rows", pre.st_rows);
  c_pre->add_option("--st-cols", pre.st_cols);
  c_pre->add_flag("--st-transpose", pre.st_transpose);
  c_pre->add_option("--coords", pre.coords, "spot coordinates CSV (spot_id,x,y)")->required();
  c_pre->add_option("--out", pre.out, "output directory (default <run-dir>/data)");
  c_pre->add_option("--min-genes", pre.min_genes)->capture_default_str();
  c_pre->add_option("--min-cells", pre.min_cells)->capture_default_str();
  c_pre->add_option("--max-mito-ribo", pre.max_mito_ribo)->capture_default_str();
  c_pre->add_option("--n-hvg", pre.n_hvg)->capture_default_str();
  c_pre->add_option("--n-shared", pre.n_shared)->capture_default_str();
  c_pre->add_option("--target-sum", pre.target_sum)->capture_default_str();

  SynthOptions syn;
  std::string layout = "quadrants";
  auto* c_syn = app.add_subcommand("synth", "Write a synthetic corpus with ground truth");
  c_syn->add_option("--out", syn.out)->capture_default_str();
  c_syn->add_option("--cells", syn.config.n_cells)->capture_default_str();
  c_syn->add_option("--query-cells", syn.config.n_query)->capture_default_str();
  c_syn->add_option("--genes", syn.config.n_genes)->capture_default_str();
  c_syn->add_option("--shared", syn.config.n_shared)->capture_default_str();
  c_syn->add_option("--types", syn.config.n_types)->capture_default_str();
  c_syn->add_option("--noise", syn.config.noise)->capture_default_str();
  c_syn->add_option("--grid-side", syn.config.grid_side)->capture_default_str();
  c_syn->add_option("--layout", layout)->check(CLI::IsMember({"quadrants", "stripes"}))->capture_default_str();
  c_syn->add_flag("--mtx", syn.mtx, "also write sc counts as Matrix Market");

  TrainOptions tr;
  auto* c_train = app.add_subcommand("train", "Run training stages");
  c_train->add_option("--stage", tr.stage, "1, 2, 3 or all")->capture_default_str();
  c_train->add_option("--data", tr.data, "preprocessed inputs (default <run-dir>/data)");

  InferOptions inf;
  auto* c_infer = app.add_subcommand("infer", "Predict coordinates and panel expression for sc cells");
  c_infer->add_option("--counts", inf.counts, "query counts (.csv or .mtx)")->required();
  c_infer->add_option("--rows", inf.rows);
  c_infer->add_option("--cols", inf.cols);
  c_infer->add_flag("--transpose", inf.transpose);
  c_infer->add_option("--out", inf.out, "predictions CSV (default <run-dir>/predictions.csv)");
  c_infer->add_option("--data", inf.data);
  c_infer->add_flag("--allow-extra-genes", inf.allow_extra_genes, "ignore genes outside the shared panel");

  BenchOptions be;
  double holdout = 0.0;
  auto* c_bench = app.add_subcommand("bench", "kNN cross-validation on latent codes");
  c_bench->add_option("--latents", be.latents, "latent CSV (id + d columns)")->required();
  c_bench->add_option("--labels", be.labels, "label CSV (id,label)")->required();
  c_bench->add_option("--out", be.out)->capture_default_str();
  c_bench->add_option("--k", be.k, "neighbours (default: number of classes)");
  c_bench->add_option("--folds", be.folds)->capture_default_str();
  auto* holdout_opt = c_bench->add_option("--holdout", holdout, "also score one split with this test fraction");
  c_bench->add_option("--k-values", be.ks, "k sweep (default 1,3,5,10,15,20 and the class count)")->delimiter(',');

  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  if (*seed_opt) g.seed = seed;

  return run_guarded(
      [&] {
        if (*c_pre) return cmd_preprocess(g, pre, std::cout);
        if (*c_syn) {
          syn.config.layout = layout == "stripes" ? SpatialLayout::stripes : SpatialLayout::quadrants;
          return cmd_synth(g, syn, std::cout);
        }
        if (*c_train) return cmd_train(g, tr, std::cout);
        if (*c_infer) return cmd_infer(g, inf, std::cout);
        if (*c_bench) {
          if (*holdout_opt) be.holdout = holdout;
          return cmd_bench(g, be, std::cout);
        }
        if (*c_grad) return cmd_gradcheck(g, std::cout);
        return static_cast<int>(kExitUsage);
      },
      std::cerr);
}
