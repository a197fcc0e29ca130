#pragma once

#include <filesystem>

#include "msdat/tensor.hpp"

namespace msdat {

/// Decodes an image file into a 3-channel blue-green-red float tensor with
/// values in [0, 255]. Grayscale files are replicated to three channels.
Tensor load_image(const std::filesystem::path& path);

/// Writes a 1- or 3-channel tensor (values clamped to [0, 255]) as an 8-bit image.
void save_image(const std::filesystem::path& path, const Tensor& image);

}  // namespace msdat
