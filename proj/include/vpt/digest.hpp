#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace vpt {

// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

// Digest over every regular file in a directory (sorted by relative path,
// hashing path and contents), so two directories with identical files hash
// identically regardless of creation order.
std::string directory_digest(const std::filesystem::path& dir);

}  // namespace vpt
