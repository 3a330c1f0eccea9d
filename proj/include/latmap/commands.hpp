#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "latmap/optim.hpp"
#include "latmap/pipeline.hpp"
#include "latmap/synth.hpp"

namespace latmap {

/// Exit codes shared by every command.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitDependency = 4, kExitNumeric = 5 };

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::filesystem::path config;  // JSON file, optional
  std::filesystem::path run_dir = "run";
  bool force = false;
  std::vector<std::string> sets;  // key=value overrides, applied after the file
};

struct PreprocessOptions {
  std::filesystem::path sc;
  std::filesystem::path sc_rows, sc_cols;  // sidecars when `sc` is .mtx
  bool sc_transpose = false;
  std::filesystem::path st;
  std::filesystem::path st_rows, st_cols;
  bool st_transpose = false;
  std::filesystem::path coords;
  std::filesystem::path out;  // defaults to <run-dir>/data
  Index min_genes = 200;
  Index min_cells = 60;
  double max_mito_ribo = 0.2;
  Index n_hvg = 2000;
  Index n_shared = 500;
  double target_sum = 1e4;
};

struct TrainOptions {
  std::string stage = "all";  // 1, 2, 3 or all
  std::filesystem::path data;  // defaults to <run-dir>/data
};

struct InferOptions {
  std::filesystem::path counts;
  std::filesystem::path rows, cols;  // sidecars when `counts` is .mtx
  bool transpose = false;
  std::filesystem::path out;  // defaults to <run-dir>/predictions.csv
  std::filesystem::path data;
  bool allow_extra_genes = false;
};

struct BenchOptions {
  std::filesystem::path latents;
  std::filesystem::path labels;
  std::filesystem::path out = "bench";
  Index k = 0;  // 0: number of classes
  Index folds = 4;
  std::optional<double> holdout;
  std::vector<Index> ks;  // empty: default sweep
};

struct SynthOptions {
  std::filesystem::path out = "synth";
  SynthConfig config;
  bool mtx = false;
};

/// Default defaults, then --config, then --set, then --seed.
TrainConfig resolve_config(const GlobalOptions& g);

/// Reads `.mtx` (with sidecars) or dense CSV counts.
CountMatrix read_counts(const std::filesystem::path& path, const std::filesystem::path& rows = {},
                        const std::filesystem::path& cols = {}, bool transpose = false);

int cmd_preprocess(const GlobalOptions& g, const PreprocessOptions& o, std::ostream& log);
int cmd_synth(const GlobalOptions& g, const SynthOptions& o, std::ostream& log);
int cmd_train(const GlobalOptions& g, const TrainOptions& o, std::ostream& log);
int cmd_infer(const GlobalOptions& g, const InferOptions& o, std::ostream& log);
int cmd_bench(const GlobalOptions& g, const BenchOptions& o, std::ostream& log);
int cmd_gradcheck(const GlobalOptions& g, std::ostream& log);

struct GradCheckEntry {
  std::string network;
  GradCheckResult result;
  double seconds = 0.0;
  int draws = 1;  // evaluation points drawn before one cleared every ReLU kink
};

/// Finite-difference checks of the full losses of small VAE, VGAE and
/// discriminator instances, each at a point away from every ReLU kink.
std::vector<GradCheckEntry> gradcheck_suite(std::uint64_t seed);

/// Runs `body`, mapping exceptions to exit codes and printing their messages to `err`.
int run_guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace latmap
