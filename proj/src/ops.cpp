#include "msdat/ops.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "msdat/error.hpp"

namespace msdat {

namespace {

constexpr int kOutBlock = 32;
constexpr int kPixelTile = 256;

// Unfolds the zero-padded receptive fields into rows indexed by (in, ky, kx)
// and columns indexed by output pixel.
std::vector<float> im2col(const Tensor& input, int kh, int kw, int stride, int pad, int out_h, int out_w) {
  const std::size_t pixels = static_cast<std::size_t>(out_h) * out_w;
  std::vector<float> cols(static_cast<std::size_t>(input.channels()) * kh * kw * pixels, 0.0f);
  std::size_t row = 0;
  for (int c = 0; c < input.channels(); ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx, ++row) {
        float* dst = cols.data() + row * pixels;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= input.height()) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= input.width()) continue;
            dst[static_cast<std::size_t>(oy) * out_w + ox] = input.at(c, iy, ix);
          }
        }
      }
    }
  }
  return cols;
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvWeights& conv, int stride, int pad, const std::string& layer) {
  if (stride < 1 || pad < 0) {
    throw ConfigError("layer '" + layer + "': stride must be >= 1 and pad >= 0");
  }
  if (input.channels() != conv.in_channels) {
    throw ConfigError("layer '" + layer + "': input has " + std::to_string(input.channels()) +
                      " channels, weights expect " + std::to_string(conv.in_channels));
  }
  if (conv.out_channels < 1 || conv.kernel_h < 1 || conv.kernel_w < 1 ||
      conv.weights.size() != conv.weight_count() ||
      conv.bias.size() != static_cast<std::size_t>(conv.out_channels)) {
    throw ConfigError("layer '" + layer + "': weight block does not match its declared shape");
  }
  const int out_h = (input.height() + 2 * pad - conv.kernel_h) / stride + 1;
  const int out_w = (input.width() + 2 * pad - conv.kernel_w) / stride + 1;
  if (input.height() + 2 * pad < conv.kernel_h || input.width() + 2 * pad < conv.kernel_w) {
    throw ConfigError("layer '" + layer + "': input smaller than kernel");
  }

  const std::vector<float> cols = im2col(input, conv.kernel_h, conv.kernel_w, stride, pad, out_h, out_w);
  const std::size_t pixels = static_cast<std::size_t>(out_h) * out_w;
  const std::size_t depth = static_cast<std::size_t>(conv.in_channels) * conv.kernel_h * conv.kernel_w;
  Tensor out(out_h, out_w, conv.out_channels);
  float* out_data = out.data().data();

  // Blocked GEMM: out[o][p] = bias[o] + sum_k W[o][k] * cols[k][p]. The sum
  // over k always runs in ascending order, so blocking never changes results.
  std::array<float, kOutBlock * kPixelTile> acc{};
  for (int o0 = 0; o0 < conv.out_channels; o0 += kOutBlock) {
    const int ob = std::min(kOutBlock, conv.out_channels - o0);
    for (std::size_t p0 = 0; p0 < pixels; p0 += kPixelTile) {
      const int pt = static_cast<int>(std::min<std::size_t>(kPixelTile, pixels - p0));
      for (int o = 0; o < ob; ++o) {
        std::fill_n(acc.data() + o * kPixelTile, pt, conv.bias[o0 + o]);
      }
      for (std::size_t k = 0; k < depth; ++k) {
        const float* col = cols.data() + k * pixels + p0;
        for (int o = 0; o < ob; ++o) {
          const float w = conv.weights[(o0 + o) * depth + k];
          if (w == 0.0f) continue;
          float* a = acc.data() + o * kPixelTile;
          for (int p = 0; p < pt; ++p) a[p] += w * col[p];
        }
      }
      for (int o = 0; o < ob; ++o) {
        std::copy_n(acc.data() + o * kPixelTile, pt, out_data + (o0 + o) * pixels + p0);
      }
    }
  }
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) v = std::max(v, 0.0f);
  return out;
}

Tensor max_pool2d(const Tensor& input, int kernel, int stride) {
  if (kernel < 1 || stride < 1) {
    throw ConfigError("max_pool2d: kernel and stride must be >= 1");
  }
  if (input.height() < kernel || input.width() < kernel) {
    throw ConfigError("max_pool2d: input " + std::to_string(input.height()) + "x" + std::to_string(input.width()) +
                      " smaller than kernel " + std::to_string(kernel));
  }
  const int out_h = (input.height() - kernel) / stride + 1;
  const int out_w = (input.width() - kernel) / stride + 1;
  Tensor out(out_h, out_w, input.channels());
  for (int c = 0; c < input.channels(); ++c) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        float best = input.at(c, oy * stride, ox * stride);
        for (int ky = 0; ky < kernel; ++ky) {
          for (int kx = 0; kx < kernel; ++kx) {
            best = std::max(best, input.at(c, oy * stride + ky, ox * stride + kx));
          }
        }
        out.at(c, oy, ox) = best;
      }
    }
  }
  return out;
}

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ConfigError("bilinear_resize: output dimensions must be positive");
  }
  if (out_h == input.height() && out_w == input.width()) return input;

  struct Tap {
    int lo;
    int hi;
    float frac;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(out);
    const double scale = out > 1 ? static_cast<double>(in - 1) / (out - 1) : 0.0;
    for (int j = 0; j < out; ++j) {
      const double pos = j * scale;
      const int lo = std::min(static_cast<int>(pos), in - 1);
      const int hi = std::min(lo + 1, in - 1);
      t[j] = {lo, hi, static_cast<float>(pos - lo)};
    }
    return t;
  };
  const std::vector<Tap> ty = taps(input.height(), out_h);
  const std::vector<Tap> tx = taps(input.width(), out_w);

  Tensor out(out_h, out_w, input.channels());
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < out_h; ++y) {
      const Tap& a = ty[y];
      for (int x = 0; x < out_w; ++x) {
        const Tap& b = tx[x];
        const float top = input.at(c, a.lo, b.lo) + b.frac * (input.at(c, a.lo, b.hi) - input.at(c, a.lo, b.lo));
        const float bottom = input.at(c, a.hi, b.lo) + b.frac * (input.at(c, a.hi, b.hi) - input.at(c, a.hi, b.lo));
        out.at(c, y, x) = top + a.frac * (bottom - top);
      }
    }
  }
  return out;
}

}  // namespace msdat
