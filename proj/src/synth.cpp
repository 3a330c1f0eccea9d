#include "latmap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "latmap/errors.hpp"
#include "latmap/matrix_io.hpp"

namespace latmap {

namespace {

std::string padded(const char* prefix, Index i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*lld", prefix, width, static_cast<long long>(i));
  return buf;
}

std::string layout_name(SpatialLayout l) { return l == SpatialLayout::quadrants ? "quadrants" : "stripes"; }

}  // namespace

std::string type_name(int t) { return "type" + std::to_string(t); }

void SynthConfig::validate() const {
  if (n_cells <= 0 || n_genes <= 0 || n_shared <= 0 || n_types <= 0 || grid_side <= 0 || n_query < 0) {
    throw std::invalid_argument("SynthConfig: counts must be positive");
  }
  if (n_shared > n_genes) throw std::invalid_argument("SynthConfig: n_shared exceeds n_genes");
  if (n_types > n_spots()) throw std::invalid_argument("SynthConfig: more types than spots");
  if (layout == SpatialLayout::quadrants && n_types > 4) {
    throw std::invalid_argument("SynthConfig: quadrant layout supports at most 4 types; use stripes");
  }
  if (layout == SpatialLayout::stripes && n_types > grid_side) {
    throw std::invalid_argument("SynthConfig: more stripes than grid columns");
  }
  if (min_expressed > n_genes) throw std::invalid_argument("SynthConfig: min_expressed exceeds n_genes");
  if (noise < 0.0) throw std::invalid_argument("SynthConfig: noise must be >= 0");
}

nlohmann::ordered_json SynthConfig::to_json() const {
  nlohmann::ordered_json j;
  j["n_cells"] = n_cells;
  j["n_query"] = n_query;
  j["n_genes"] = n_genes;
  j["n_shared"] = n_shared;
  j["n_types"] = n_types;
  j["noise"] = noise;
  j["marker_fraction"] = marker_fraction;
  j["marker_effect"] = marker_effect;
  j["min_expressed"] = min_expressed;
  j["layout"] = layout_name(layout);
  j["grid_side"] = grid_side;
  j["seed"] = seed;
  return j;
}

SynthConfig SynthConfig::from_json(const nlohmann::ordered_json& j) {
  SynthConfig c;
  c.n_cells = j.value("n_cells", c.n_cells);
  c.n_query = j.value("n_query", c.n_query);
  c.n_genes = j.value("n_genes", c.n_genes);
  c.n_shared = j.value("n_shared", c.n_shared);
  c.n_types = j.value("n_types", c.n_types);
  c.noise = j.value("noise", c.noise);
  c.marker_fraction = j.value("marker_fraction", c.marker_fraction);
  c.marker_effect = j.value("marker_effect", c.marker_effect);
  c.min_expressed = j.value("min_expressed", c.min_expressed);
  const auto layout = j.value("layout", std::string("quadrants"));
  if (layout == "quadrants") {
    c.layout = SpatialLayout::quadrants;
  } else if (layout == "stripes") {
    c.layout = SpatialLayout::stripes;
  } else {
    throw std::invalid_argument("unknown layout '" + layout + "'");
  }
  c.grid_side = j.value("grid_side", c.grid_side);
  c.seed = j.value("seed", c.seed);
  return c;
}

TypeProfiles make_profiles(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng = Rng(cfg.seed).derive("profiles");
  TypeProfiles p;
  for (Index g = 0; g < cfg.n_genes; ++g) p.gene_ids.push_back(padded("G", g, 5));
  p.log_rate = Matrix(cfg.n_types, cfg.n_genes);
  for (Index g = 0; g < cfg.n_genes; ++g) {
    const double base = 0.3 + 0.6 * rng.normal();
    for (Index t = 0; t < cfg.n_types; ++t) {
      double v = base;
      if (rng.uniform(0.0, 1.0) < cfg.marker_fraction) {
        const double sign = rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
        v += sign * cfg.marker_effect * rng.uniform(0.5, 1.5);
      }
      p.log_rate(t, g) = std::clamp(v, -1.0, 3.0);
    }
  }
  auto perm = rng.permutation(cfg.n_genes);
  p.shared_cols.assign(perm.begin(), perm.begin() + cfg.n_shared);
  std::sort(p.shared_cols.begin(), p.shared_cols.end());
  for (Index c : p.shared_cols) p.shared_genes.push_back(p.gene_ids[static_cast<std::size_t>(c)]);
  return p;
}

namespace {

/// Poisson counts for rows of the given types over the given columns.
MatrixX<std::int64_t> draw_counts(const TypeProfiles& p, const std::vector<int>& types, const std::vector<Index>& cols,
                                  double noise, Index min_expressed, Rng& rng) {
  const auto n_cols = static_cast<Index>(cols.size());
  MatrixX<std::int64_t> out(static_cast<Index>(types.size()), n_cols);
  for (Index r = 0; r < out.rows(); ++r) {
    const int t = types[static_cast<std::size_t>(r)];
    Index expressed = 0;
    for (Index j = 0; j < n_cols; ++j) {
      const double eps = noise > 0.0 ? noise * rng.normal() : 0.0;
      out(r, j) = rng.poisson(std::exp(p.log_rate(t, cols[static_cast<std::size_t>(j)]) + eps));
      expressed += out(r, j) > 0;
    }
    for (Index j = 0; j < n_cols && expressed < min_expressed; ++j) {
      if (out(r, j) == 0) {
        out(r, j) = 1;
        ++expressed;
      }
    }
  }
  return out;
}

}  // namespace

ScSynth gen_sc(const SynthConfig& cfg) {
  ScSynth s;
  s.profiles = make_profiles(cfg);
  std::vector<Index> all(static_cast<std::size_t>(cfg.n_genes));
  for (Index g = 0; g < cfg.n_genes; ++g) all[static_cast<std::size_t>(g)] = g;

  auto make = [&](Index n, const char* prefix, const char* tag, std::vector<int>& labels) {
    Rng rng = Rng(cfg.seed).derive(tag);
    labels.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % cfg.n_types);
    rng.shuffle(labels);
    std::vector<std::string> ids;
    for (Index i = 0; i < n; ++i) ids.push_back(padded(prefix, i, 5));
    return CountMatrix::from_dense(std::move(ids), s.profiles.gene_ids,
                                   draw_counts(s.profiles, labels, all, cfg.noise, cfg.min_expressed, rng));
  };
  s.counts = make(cfg.n_cells, "cell", "sc", s.labels);
  if (cfg.n_query > 0) {
    s.query = make(cfg.n_query, "query", "query", s.query_labels);
  } else {
    s.query = CountMatrix({}, s.profiles.gene_ids, CountStorage(0, cfg.n_genes));
  }
  return s;
}

StSynth gen_st(const SynthConfig& cfg, const TypeProfiles& profiles) {
  cfg.validate();
  StSynth s;
  const Index side = cfg.grid_side;
  const Index n = cfg.n_spots();
  s.coords = Matrix(n, 2);
  s.labels.resize(static_cast<std::size_t>(n));
  const double half = static_cast<double>(side) / 2.0;
  const double width = static_cast<double>(side) / static_cast<double>(cfg.n_types);
  std::vector<std::string> ids;
  for (Index i = 0; i < n; ++i) {
    const Index x = i % side;
    const Index y = i / side;
    s.coords(i, 0) = static_cast<double>(x);
    s.coords(i, 1) = static_cast<double>(y);
    int t = 0;
    if (cfg.layout == SpatialLayout::quadrants) {
      const int q = (static_cast<double>(x) + 0.5 >= half ? 1 : 0) + (static_cast<double>(y) + 0.5 >= half ? 2 : 0);
      t = q % static_cast<int>(cfg.n_types);
    } else {
      t = std::min(static_cast<int>((static_cast<double>(x) + 0.5) / width), static_cast<int>(cfg.n_types) - 1);
    }
    s.labels[static_cast<std::size_t>(i)] = t;
    ids.push_back(padded("spot", i, 5));
  }
  const double lo = -0.5, hi = static_cast<double>(side) - 0.5;
  if (cfg.layout == SpatialLayout::quadrants) {
    for (int q = 0; q < 4; ++q) {
      Region r;
      r.label = q % static_cast<int>(cfg.n_types);
      r.x_min = (q & 1) ? lo + half : lo;
      r.x_max = (q & 1) ? hi : lo + half;
      r.y_min = (q & 2) ? lo + half : lo;
      r.y_max = (q & 2) ? hi : lo + half;
      s.regions.push_back(r);
    }
  } else {
    for (int t = 0; t < static_cast<int>(cfg.n_types); ++t) {
      s.regions.push_back({t, lo + width * t, lo + width * (t + 1), lo, hi});
    }
  }
  Rng rng = Rng(cfg.seed).derive("st");
  s.counts = CountMatrix::from_dense(std::move(ids), profiles.shared_genes,
                                     draw_counts(profiles, s.labels, profiles.shared_cols, cfg.noise, 0, rng));
  return s;
}

bool in_region(const std::vector<Region>& regions, int label, double x, double y) {
  return std::any_of(regions.begin(), regions.end(),
                     [&](const Region& r) { return r.label == label && r.contains(x, y); });
}

SynthFiles synth_files(const std::filesystem::path& dir) {
  return {dir / "sc_counts.csv",    dir / "sc_query_counts.csv", dir / "st_counts.csv",
          dir / "st_coords.csv",    dir / "truth_labels.csv",    dir / "regions.csv",
          dir / "synth_config.json"};
}

SynthFiles write_synth(const std::filesystem::path& dir, const SynthConfig& cfg, bool with_mtx) {
  std::filesystem::create_directories(dir);
  const auto files = synth_files(dir);
  const ScSynth sc = gen_sc(cfg);
  const StSynth st = gen_st(cfg, sc.profiles);
  write_count_csv(files.sc_counts, sc.counts, "cell_id");
  write_count_csv(files.sc_query_counts, sc.query, "cell_id");
  write_count_csv(files.st_counts, st.counts, "spot_id");
  write_coords_csv(files.st_coords, st.counts.row_ids(), st.coords);
  if (with_mtx) write_matrix_market(dir / "sc_counts.mtx", dir / "sc_counts.rows.txt", dir / "sc_counts.cols.txt", sc.counts);

  LabelTable truth;
  auto add = [&](const CountMatrix& m, const std::vector<int>& labels) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      truth.ids.push_back(m.row_ids()[i]);
      truth.labels.push_back(type_name(labels[i]));
    }
  };
  add(sc.counts, sc.labels);
  add(sc.query, sc.query_labels);
  add(st.counts, st.labels);
  write_label_csv(files.truth_labels, truth);

  std::ofstream reg(files.regions);
  reg << "label,x_min,x_max,y_min,y_max\n";
  for (const auto& r : st.regions) {
    reg << type_name(r.label) << "," << format_double(r.x_min) << "," << format_double(r.x_max) << ","
        << format_double(r.y_min) << "," << format_double(r.y_max) << "\n";
  }
  std::ofstream(files.config) << cfg.to_json().dump(2) << "\n";
  return files;
}

std::vector<Region> read_regions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<Region> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 5 || f[0].rfind("type", 0) != 0) throw DataError(path.string() + ": bad region row '" + line + "'");
    out.push_back({std::stoi(f[0].substr(4)), std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
  }
  return out;
}

}  // namespace latmap
