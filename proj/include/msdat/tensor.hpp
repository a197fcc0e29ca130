#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace msdat {

/// Dense height x width x channels float map, stored as channel-major planes
/// ([c][y][x], row-major inside a plane). Images, features and response maps
/// all use this type; images carry 3 channels in blue-green-red order.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int height, int width, int channels, float fill = 0.0f);
  Tensor(int height, int width, int channels, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int c, int y, int x) { return data_[(c * plane_size()) + static_cast<std::size_t>(y) * width_ + x]; }
  float at(int c, int y, int x) const { return data_[(c * plane_size()) + static_cast<std::size_t>(y) * width_ + x]; }

  std::span<float> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const float> plane(int c) const { return {data_.data() + c * plane_size(), plane_size()}; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool same_shape(const Tensor& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Complex spectrum over a fixed spatial grid, same [c][y][x] layout as Tensor.
struct ComplexSpectrum {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::complex<double>> data;

  ComplexSpectrum() = default;
  ComplexSpectrum(int h, int w, int c) : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::span<std::complex<double>> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
  std::span<const std::complex<double>> plane(int c) const { return {data.data() + c * plane_size(), plane_size()}; }
  bool same_grid(const ComplexSpectrum& o) const { return height == o.height && width == o.width; }

  friend bool operator==(const ComplexSpectrum&, const ComplexSpectrum&) = default;
};

}  // namespace msdat
