#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace latmap {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 1469598103934665603ull);

/// 16 lowercase hex digits.
std::string hex_digest(std::uint64_t h);

/// FNV-1a 64 over the file's bytes, as hex.
std::string file_digest(const std::filesystem::path& path);

}  // namespace latmap
