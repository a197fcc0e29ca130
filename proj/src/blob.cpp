#include "msdat/blob.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "msdat/error.hpp"

namespace msdat {

namespace {

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

template <typename T>
void put(std::vector<unsigned char>& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get(const unsigned char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

constexpr std::size_t kTrailerBytes = sizeof(std::uint64_t) + sizeof(std::uint32_t);

}  // namespace

std::uint32_t crc32_of(std::span<const float> values) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  const auto* bytes = reinterpret_cast<const Bytef*>(values.data());
  std::size_t remaining = values.size_bytes();
  while (remaining > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(remaining, 1u << 30));
    crc = ::crc32(crc, bytes, chunk);
    bytes += chunk;
    remaining -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t write_blob(const std::filesystem::path& path, std::span<const float> values) {
  std::vector<unsigned char> bytes(values.size_bytes());
  std::memcpy(bytes.data(), values.data(), values.size_bytes());
  const std::uint32_t crc = crc32_of(values);
  put<std::uint64_t>(bytes, values.size_bytes());
  put<std::uint32_t>(bytes, crc);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write blob " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing blob " + path.string());
  return crc;
}

RawBlob read_blob_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open blob " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  RawBlob raw;
  std::size_t payload = 0;
  if (bytes.size() >= kTrailerBytes) {
    payload = bytes.size() - kTrailerBytes;
    raw.trailer_length = get<std::uint64_t>(bytes.data() + payload);
    raw.trailer_crc = get<std::uint32_t>(bytes.data() + payload + sizeof(std::uint64_t));
    raw.has_trailer = true;
  }
  raw.values.resize(payload / sizeof(float));
  std::memcpy(raw.values.data(), bytes.data(), raw.values.size() * sizeof(float));
  return raw;
}

std::string format_crc(std::uint32_t crc) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", crc);
  return std::string("crc32:") + buf;
}

std::uint32_t parse_crc(const std::string& text) {
  const std::string prefix = "crc32:";
  if (text.rfind(prefix, 0) != 0 || text.size() != prefix.size() + 8) {
    throw DataError("unrecognized checksum field '" + text + "' (expected crc32:xxxxxxxx)");
  }
  try {
    return static_cast<std::uint32_t>(std::stoul(text.substr(prefix.size()), nullptr, 16));
  } catch (const std::exception&) {
    throw DataError("unparsable checksum field '" + text + "'");
  }
}

}  // namespace msdat
