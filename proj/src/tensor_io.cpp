#include "vpt/tensor_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace vpt {

namespace {

constexpr std::size_t kHeaderBytes = 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.rank() > 255) throw ShapeError("VPT1 supports rank <= 255");
  std::vector<std::uint8_t> out{'V', 'P', 'T', '1', kDtypeF32, static_cast<std::uint8_t>(t.rank()), 0, 0};
  out.reserve(kHeaderBytes + 4 * t.rank() + 4 * t.numel());
  for (auto d : t.dims()) {
    if (d > 0xFFFFFFFFu) throw ShapeError("VPT1 extent exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& source) {
  if (bytes.size() < kHeaderBytes) {
    throw DataError(source + ": truncated header, expected at least " + std::to_string(kHeaderBytes) +
                    " bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes[0] != 'V' || bytes[1] != 'P' || bytes[2] != 'T' || bytes[3] != '1') {
    throw DataError(source + ": bad magic, expected 'VPT1'");
  }
  if (bytes[4] != kDtypeF32) {
    throw DataError(source + ": unsupported dtype " + std::to_string(bytes[4]) + ", expected 0 (f32)");
  }
  const std::size_t rank = bytes[5];
  if (rank == 0) throw DataError(source + ": rank must be at least 1");
  const std::size_t header = kHeaderBytes + 4 * rank;
  if (bytes.size() < header) {
    throw DataError(source + ": truncated extents, expected " + std::to_string(header) + " header bytes, got " +
                    std::to_string(bytes.size()));
  }
  Shape dims(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    dims[i] = get_u32(bytes.data() + kHeaderBytes + 4 * i);
    if (dims[i] == 0) throw DataError(source + ": extent " + std::to_string(i) + " is zero");
    count *= dims[i];
  }
  const std::size_t expected = header + 4 * count;
  if (bytes.size() != expected) {
    throw DataError(source + ": payload length mismatch, expected " + std::to_string(expected) + " bytes, got " +
                    std::to_string(bytes.size()));
  }
  std::vector<float> values(count);
  const std::uint8_t* p = bytes.data() + header;
  for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  return Tensor(std::move(dims), std::move(values));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_file_bytes(path, encode_tensor(t)); }

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path), path.string()); }

}  // namespace vpt
