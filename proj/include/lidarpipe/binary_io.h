#ifndef LIDARPIPE_BINARY_IO_H_
#define LIDARPIPE_BINARY_IO_H_

// Little-endian packing helpers shared by the point-cloud reader and the
// encoder dump formats. Byte order is explicit so the formats do not depend
// on the host.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lidarpipe {

using Bytes = std::vector<std::byte>;

inline void append_u32_le(Bytes& out, std::uint32_t value) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<std::byte>((value >> shift) & 0xFFu));
  }
}

inline void append_f32_le(Bytes& out, float value) {
  append_u32_le(out, std::bit_cast<std::uint32_t>(value));
}

inline std::uint32_t read_u32_le(std::span<const std::byte> in,
                                 std::size_t offset) {
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    value |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  }
  return value;
}

inline float read_f32_le(std::span<const std::byte> in, std::size_t offset) {
  return std::bit_cast<float>(read_u32_le(in, offset));
}

// Whole-file helpers. Both throw Error(kIo) when the file cannot be opened.
Bytes read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::byte> data);
void write_file_text(const std::filesystem::path& path, const std::string& text);

}  // namespace lidarpipe

#endif  // LIDARPIPE_BINARY_IO_H_
