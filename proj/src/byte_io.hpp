#pragma once

// Little-endian scalar encoding shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <vector>

namespace rhyme::detail {

template <typename UInt> void put_le(std::vector<std::uint8_t> &out, UInt value) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename UInt> UInt get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(bytes[offset + i]) << (8 * i);
  }
  return value;
}

inline void put_f32(std::vector<std::uint8_t> &out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::vector<std::uint8_t> &out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

inline float get_f32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset));
}
inline double get_f64(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
}

/// Throws IoError.
std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
/// Throws IoError.
void write_file(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);

} // namespace rhyme::detail
