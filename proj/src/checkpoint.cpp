#include "latmap/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "latmap/digest.hpp"
#include "latmap/errors.hpp"

namespace latmap {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex_digest(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return hex_digest(h);
}

Checkpoint Checkpoint::from_parameters(std::string arch, nlohmann::ordered_json config,
                                       const std::vector<ad::Tensor>& params) {
  Checkpoint c;
  c.arch = std::move(arch);
  c.config = std::move(config);
  c.config_hash = hex_digest(fnv1a64(c.config.dump()));
  for (const auto& p : params) c.arrays.emplace_back(p.name(), p.value());
  return c;
}

const Matrix& Checkpoint::array(const std::string& name) const {
  for (const auto& [n, m] : arrays) {
    if (n == name) return m;
  }
  throw DataError("checkpoint '" + arch + "' has no array '" + name + "'");
}

void Checkpoint::restore(std::vector<ad::Tensor>& params) const {
  for (auto& p : params) {
    const Matrix& src = array(p.name());
    if (src.rows() != p.rows() || src.cols() != p.cols()) {
      throw DimensionError("checkpoint array '" + p.name() + "' has shape " + std::to_string(src.rows()) + "x" +
                           std::to_string(src.cols()));
    }
    p.mutable_value() = src;
  }
}

nlohmann::ordered_json to_json(const Checkpoint& ckpt) {
  nlohmann::ordered_json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["arch"] = ckpt.arch;
  j["config"] = ckpt.config;
  j["config_hash"] = ckpt.config_hash;
  auto& shapes = j["shapes"] = nlohmann::ordered_json::object();
  auto& arrays = j["arrays"] = nlohmann::ordered_json::object();
  for (const auto& [name, m] : ckpt.arrays) {
    shapes[name] = {m.rows(), m.cols()};
    arrays[name] = std::vector<double>(m.data(), m.data() + m.size());
  }
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::ordered_json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion) {
    throw DataError("unsupported checkpoint format_version " + std::to_string(version));
  }
  Checkpoint c;
  c.arch = j.at("arch").get<std::string>();
  c.config = j.at("config");
  c.config_hash = j.at("config_hash").get<std::string>();
  const auto& shapes = j.at("shapes");
  const auto& arrays = j.at("arrays");
  for (auto it = shapes.begin(); it != shapes.end(); ++it) {
    const auto rows = it.value().at(0).get<Index>();
    const auto cols = it.value().at(1).get<Index>();
    const auto flat = arrays.at(it.key()).get<std::vector<double>>();
    if (static_cast<Index>(flat.size()) != rows * cols) {
      throw DataError("checkpoint array '" + it.key() + "' length does not match its shape");
    }
    Matrix m(rows, cols);
    std::copy(flat.begin(), flat.end(), m.data());
    c.arrays.emplace_back(it.key(), std::move(m));
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json(ckpt).dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("missing checkpoint " + path.string());
  try {
    return checkpoint_from_json(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace latmap
