#include "msdat/tensor.hpp"

#include <string>

#include "msdat/error.hpp"

namespace msdat {

namespace {

void check_dims(int height, int width, int channels) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ConfigError("tensor dimensions must be positive, got " + std::to_string(height) + "x" +
                      std::to_string(width) + "x" + std::to_string(channels));
  }
}

}  // namespace

Tensor::Tensor(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Tensor::Tensor(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ConfigError("tensor data length " + std::to_string(data_.size()) + " does not match " +
                      std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels));
  }
}

}  // namespace msdat
