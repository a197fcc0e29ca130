#pragma once

#include <string>
#include <vector>

#include "msdat/tensor.hpp"

namespace msdat {

/// Weights of one convolution, layout [out][in][kh][kw], plus one bias per
/// output channel.
struct ConvWeights {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  std::vector<float> weights;
  std::vector<float> bias;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel_h * kernel_w;
  }
  float at(int o, int i, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel_h + ky) * kernel_w + kx];
  }
};

/// Zero-padded 2-D convolution (cross-correlation, as in every CNN runtime).
/// Output size is floor((in + 2*pad - kernel) / stride) + 1 per axis.
/// Throws ConfigError naming `layer` on any shape mismatch.
Tensor conv2d(const Tensor& input, const ConvWeights& conv, int stride, int pad,
              const std::string& layer = "conv");

Tensor relu(const Tensor& input);

/// Per-channel window maximum without padding.
Tensor max_pool2d(const Tensor& input, int kernel, int stride);

/// Per-channel bilinear resampling with corner-aligned sampling: output
/// sample j lands on input coordinate j * (in - 1) / (out - 1).
Tensor bilinear_resize(const Tensor& input, int out_h, int out_w);

}  // namespace msdat
