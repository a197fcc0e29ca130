#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace msdat {

/// Raw little-endian float32 payload followed by a trailer of
/// (uint64 payload byte length, uint32 CRC32 of the payload).
struct Blob {
  std::vector<float> values;
  std::uint32_t crc32 = 0;
};

std::uint32_t crc32_of(std::span<const float> values);

/// Writes the payload and trailer; returns the CRC32 written.
std::uint32_t write_blob(const std::filesystem::path& path, std::span<const float> values);

/// Reads the raw payload without validating the trailer. `available` is the
/// number of payload floats the file can hold (file size minus trailer).
struct RawBlob {
  std::vector<float> values;
  std::uint64_t trailer_length = 0;
  std::uint32_t trailer_crc = 0;
  bool has_trailer = false;
};
RawBlob read_blob_raw(const std::filesystem::path& path);

std::string format_crc(std::uint32_t crc);
std::uint32_t parse_crc(const std::string& text);

}  // namespace msdat
