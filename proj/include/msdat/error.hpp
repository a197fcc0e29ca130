#pragma once

#include <stdexcept>
#include <string>

namespace msdat {

/// Invalid shapes, parameters or network/adapter wiring.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent files on disk (manifests, blobs, sequences).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace msdat
