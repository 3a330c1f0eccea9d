#include "latmap/run_dir.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include "latmap/digest.hpp"
#include "latmap/errors.hpp"
#include "latmap/matrix_io.hpp"

namespace latmap {

RunLayout::RunLayout(fs::path run_dir, fs::path data_dir)
    : root(std::move(run_dir)), data(data_dir.empty() ? root / "data" : std::move(data_dir)) {}

std::string RunLayout::relative(const fs::path& p) const {
  const auto rel = p.lexically_relative(root);
  if (rel.empty() || *rel.begin() == "..") return p.generic_string();
  return rel.generic_string();
}

RunLock::RunLock(fs::path path) : path_(std::move(path)) {
  fs::create_directories(path_.parent_path());
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw DependencyError("run directory is locked by another command (" + path_.string() +
                            "); remove it if no command is running");
    }
    throw DataError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["tool_version"] = tool_version;
  j["seed"] = seed;
  j["config"] = config;
  j["inputs"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : inputs) j["inputs"][k] = v;
  j["artifacts"] = artifacts;
  j["stages_completed"] = stages_completed;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::ordered_json& j) {
  RunManifest m;
  m.tool_version = j.value("tool_version", std::string{});
  m.seed = j.value("seed", std::uint64_t{0});
  m.config = j.value("config", nlohmann::ordered_json::object());
  if (j.contains("inputs")) {
    for (auto it = j["inputs"].begin(); it != j["inputs"].end(); ++it) m.inputs[it.key()] = it.value().get<std::string>();
  }
  m.artifacts = j.value("artifacts", std::vector<std::string>{});
  m.stages_completed = j.value("stages_completed", std::vector<int>{});
  return m;
}

bool RunManifest::stage_done(int stage) const {
  return std::find(stages_completed.begin(), stages_completed.end(), stage) != stages_completed.end();
}

void RunManifest::mark_stage(int stage) {
  if (!stage_done(stage)) stages_completed.push_back(stage);
  std::sort(stages_completed.begin(), stages_completed.end());
}

void RunManifest::add_artifact(const std::string& path) {
  if (std::find(artifacts.begin(), artifacts.end(), path) == artifacts.end()) artifacts.push_back(path);
}

void write_json_atomic(const fs::path& path, const nlohmann::ordered_json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp, path);
}

nlohmann::ordered_json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("missing " + path.string());
  auto j = nlohmann::ordered_json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError(path.string() + ": invalid JSON");
  return j;
}

void track_input(RunManifest& m, const std::string& key, const fs::path& path) {
  if (!fs::exists(path)) throw DependencyError("missing input " + path.string());
  const std::string digest = file_digest(path);
  const auto it = m.inputs.find(key);
  if (it != m.inputs.end() && it->second != digest) {
    throw DependencyError("input " + key + " changed since it was recorded in the manifest (digest " + it->second +
                          ", now " + digest + "); rerun with --force");
  }
  m.inputs[key] = digest;
}

void write_latent(const fs::path& path, const std::vector<std::string>& row_ids, const LatentMatrix& z) {
  if (static_cast<Index>(row_ids.size()) != z.codes.rows()) throw DimensionError("write_latent: row id count mismatch");
  fs::create_directories(path.parent_path());
  LabeledMatrix m{row_ids, {}, z.codes};
  for (Index c = 0; c < z.dim(); ++c) m.col_ids.push_back("z" + std::to_string(c));
  write_real_csv(path, m, "id");
}

LatentMatrix read_latent(const fs::path& path, LatentSource source, std::vector<std::string>* row_ids) {
  if (!fs::exists(path)) throw DependencyError("missing " + path.string());
  auto m = read_real_csv(path);
  if (row_ids) *row_ids = m.row_ids;
  return {std::move(m.values), source, true};
}

}  // namespace latmap
