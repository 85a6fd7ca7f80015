#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vpt/tensor.hpp"

namespace vpt {

// "VPT1" container: magic 'V','P','T','1'; u8 dtype (0 = f32); u8 rank;
// two reserved zero bytes; rank little-endian u32 extents; little-endian f32
// payload in row-major order.
inline constexpr std::uint8_t kDtypeF32 = 0;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
// `source` names the origin in error messages.
Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& source = "buffer");

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace vpt
