#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latmap/autodiff.hpp"

namespace latmap {

inline constexpr int kCheckpointFormatVersion = 1;

/**
 * Serialized model parameters. On disk this is a JSON object with fields in a
 * fixed order: format_version, arch, config, config_hash, shapes, arrays.
 * Arrays are flat row-major lists of decimal numbers printed with round-trip
 * precision, so save/load reproduces every bit.
 */
struct Checkpoint {
  std::string arch;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::string config_hash;
  std::vector<std::pair<std::string, Matrix>> arrays;

  /// Snapshot of named parameter tensors.
  static Checkpoint from_parameters(std::string arch, nlohmann::ordered_json config,
                                    const std::vector<ad::Tensor>& params);

  /// Copies stored arrays into tensors with matching names and shapes.
  void restore(std::vector<ad::Tensor>& params) const;

  const Matrix& array(const std::string& name) const;
};

nlohmann::ordered_json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::ordered_json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace latmap
