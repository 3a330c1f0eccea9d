#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "latmap/vae.hpp"

namespace latmap {

inline constexpr const char* kToolVersion = "0.1.0";

namespace fs = std::filesystem;

/// Paths inside a run directory.
struct RunLayout {
  fs::path root;
  fs::path data;  // preprocessed inputs; root/data unless overridden

  explicit RunLayout(fs::path run_dir, fs::path data_dir = {});

  fs::path config() const { return root / "config.json"; }
  fs::path manifest() const { return root / "manifest.json"; }
  fs::path lock() const { return root / "run.lock"; }
  fs::path transform() const { return root / "transform.json"; }
  fs::path checkpoint(const std::string& name) const { return root / "checkpoints" / (name + ".json"); }
  fs::path latent(const std::string& name) const { return root / "latents" / (name + ".csv"); }
  fs::path history(int stage) const { return root / "history" / ("stage" + std::to_string(stage) + ".csv"); }

  fs::path x_sc2000() const { return data / "x_sc2000.csv"; }
  fs::path x_sc500() const { return data / "x_sc500.csv"; }
  fs::path x_st500() const { return data / "x_st500.csv"; }
  fs::path st_coords() const { return data / "st_coords.csv"; }
  fs::path panel_hvg() const { return data / "panel_hvg2000.txt"; }
  fs::path panel_shared() const { return data / "panel_shared500.txt"; }
  fs::path preprocess_summary() const { return data / "preprocess_summary.json"; }

  /// Path relative to the run root when it lies inside it.
  std::string relative(const fs::path& p) const;
};

/// Exclusive claim on a run directory for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(fs::path path);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<std::string, std::string> inputs;  // path -> digest
  std::vector<std::string> artifacts;
  std::vector<int> stages_completed;

  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::ordered_json& j);
  bool stage_done(int stage) const;
  void mark_stage(int stage);
  void add_artifact(const std::string& path);
};

/// Writes to a sibling temp file, then renames over the target.
void write_json_atomic(const fs::path& path, const nlohmann::ordered_json& j);
nlohmann::ordered_json read_json(const fs::path& path);

/// Records the digest of `path` under its key, or throws DependencyError if a
/// digest was recorded earlier and the file has changed since.
void track_input(RunManifest& m, const std::string& key, const fs::path& path);

void write_latent(const fs::path& path, const std::vector<std::string>& row_ids, const LatentMatrix& z);
/// Reads a persisted latent as fixed.
LatentMatrix read_latent(const fs::path& path, LatentSource source, std::vector<std::string>* row_ids = nullptr);

}  // namespace latmap
