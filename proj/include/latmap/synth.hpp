#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "latmap/count_matrix.hpp"
#include "latmap/random.hpp"

namespace latmap {

enum class SpatialLayout { quadrants, stripes };

/// Ground-truth generator settings. Spots sit on a grid_side x grid_side grid.
struct SynthConfig {
  Index n_cells = 1000;
  Index n_query = 200;  // held-out sc cells, same profiles
  Index n_genes = 2000;
  Index n_shared = 500;
  Index n_types = 4;
  double noise = 0.3;             // sd of per-entry log-rate jitter
  double marker_fraction = 0.1;   // share of genes shifted per type
  double marker_effect = 1.0;     // typical |log-rate shift| of a marker
  Index min_expressed = 200;      // every sc cell expresses at least this many genes
  SpatialLayout layout = SpatialLayout::quadrants;
  Index grid_side = 30;
  std::uint64_t seed = 42;

  Index n_spots() const { return grid_side * grid_side; }
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static SynthConfig from_json(const nlohmann::ordered_json& j);
};

/// Per-type mean log-rates; row t is type t.
struct TypeProfiles {
  std::vector<std::string> gene_ids;
  Matrix log_rate;  // n_types x n_genes
  std::vector<Index> shared_cols;  // ascending, into gene_ids
  std::vector<std::string> shared_genes;
};

struct ScSynth {
  CountMatrix counts;
  std::vector<int> labels;
  CountMatrix query;
  std::vector<int> query_labels;
  TypeProfiles profiles;
};

/// Axis-aligned rectangle owned by one type, in tissue coordinates.
struct Region {
  int label = 0;
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  bool contains(double x, double y) const { return x >= x_min && x < x_max && y >= y_min && y < y_max; }
};

struct StSynth {
  CountMatrix counts;  // spot x shared genes, panel order
  Matrix coords;       // spot x 2
  std::vector<int> labels;
  std::vector<Region> regions;
};

std::string type_name(int t);

TypeProfiles make_profiles(const SynthConfig& cfg);
ScSynth gen_sc(const SynthConfig& cfg);
StSynth gen_st(const SynthConfig& cfg, const TypeProfiles& profiles);

bool in_region(const std::vector<Region>& regions, int label, double x, double y);

struct SynthFiles {
  std::filesystem::path sc_counts, sc_query_counts, st_counts, st_coords, truth_labels, regions, config;
};

/// Paths of the files `write_synth` produces in `dir`.
SynthFiles synth_files(const std::filesystem::path& dir);

/// Writes sc_counts.csv, sc_query_counts.csv, st_counts.csv, st_coords.csv,
/// truth_labels.csv, regions.csv and synth_config.json; optionally the sc
/// counts again as Matrix Market with id sidecars.
SynthFiles write_synth(const std::filesystem::path& dir, const SynthConfig& cfg, bool with_mtx = false);

std::vector<Region> read_regions(const std::filesystem::path& path);

}  // namespace latmap
