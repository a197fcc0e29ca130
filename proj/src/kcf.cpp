#include "msdat/kcf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "msdat/error.hpp"
#include "msdat/fft.hpp"

namespace msdat {

namespace {

using cplx = std::complex<double>;

double squared_norm(const ComplexSpectrum& s) {
  double sum = 0.0;
  for (const cplx& v : s.data) sum += std::norm(v);
  return sum / static_cast<double>(s.plane_size());
}

// Kernel map between two feature spectra, left in the spatial domain as a
// complex single-channel buffer (imaginary parts zero).
ComplexSpectrum kernel_map(const ComplexSpectrum& xf, const ComplexSpectrum& zf, const KcfParams& params) {
  if (!xf.same_grid(zf) || xf.channels != zf.channels) {
    throw ConfigError("kernel_correlation: feature shapes differ (" + std::to_string(xf.height) + "x" +
                      std::to_string(xf.width) + "x" + std::to_string(xf.channels) + " vs " +
                      std::to_string(zf.height) + "x" + std::to_string(zf.width) + "x" + std::to_string(zf.channels) +
                      ")");
  }
  ComplexSpectrum cross(xf.height, xf.width, 1);
  auto acc = cross.plane(0);
  for (int c = 0; c < xf.channels; ++c) {
    const auto a = xf.plane(c);
    const auto b = zf.plane(c);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += a[i] * std::conj(b[i]);
  }
  ComplexSpectrum k = ifft2_complex(cross);
  const double n = static_cast<double>(xf.plane_size()) * xf.channels;

  if (params.kernel == KernelType::linear) {
    for (cplx& v : k.data) v = {v.real() / n, 0.0};
  } else {
    const double norms = squared_norm(xf) + squared_norm(zf);
    const double denom = params.kernel_sigma * params.kernel_sigma * n;
    for (cplx& v : k.data) v = {std::exp(-std::max(0.0, norms - 2.0 * v.real()) / denom), 0.0};
  }
  return k;
}

struct Trained {
  ComplexSpectrum xf;
  ComplexSpectrum alphaf;
};

Trained solve(const Tensor& features, const ComplexSpectrum& yf, const KcfParams& params) {
  Trained t;
  t.xf = fft2(features);
  const ComplexSpectrum kf = fft2_complex(kernel_map(t.xf, t.xf, params));
  t.alphaf = ComplexSpectrum(kf.height, kf.width, 1);
  for (std::size_t i = 0; i < kf.data.size(); ++i) t.alphaf.data[i] = yf.data[i] / (kf.data[i] + params.lambda);
  return t;
}

void check_grid(const KcfModel& model, const Tensor& features, const char* op) {
  if (features.height() != model.grid_h || features.width() != model.grid_w ||
      features.channels() != model.channels) {
    throw ConfigError(std::string(op) + ": features " + std::to_string(features.height()) + "x" +
                      std::to_string(features.width()) + "x" + std::to_string(features.channels()) +
                      " do not match model grid " + std::to_string(model.grid_h) + "x" + std::to_string(model.grid_w) +
                      "x" + std::to_string(model.channels));
  }
}

}  // namespace

void KcfParams::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("kcf: lambda must be > 0");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("kcf: eta must lie in [0, 1]");
  if (!(window_scale > 1.0)) throw ConfigError("kcf: window scale must be > 1");
  if (!(kernel_sigma > 0.0)) throw ConfigError("kcf: kernel sigma must be > 0");
  if (!(output_sigma_factor > 0.0)) throw ConfigError("kcf: output sigma factor must be > 0");
}

Tensor gaussian_labels(int h, int w, double sigma) {
  if (h < 3 || w < 3 || !(sigma > 0.0)) throw ConfigError("gaussian_labels: need h, w >= 3 and sigma > 0");
  Tensor y(h, w, 1);
  const int cy = h / 2;
  const int cx = w / 2;
  for (int r = 0; r < h; ++r) {
    const int dr0 = std::abs(r - cy);
    const int dr = std::min(dr0, h - dr0);
    for (int c = 0; c < w; ++c) {
      const int dc0 = std::abs(c - cx);
      const int dc = std::min(dc0, w - dc0);
      y.at(0, r, c) = static_cast<float>(std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma)));
    }
  }
  return y;
}

Tensor hann_window(int h, int w) {
  if (h < 2 || w < 2) throw ConfigError("hann_window: need h, w >= 2");
  auto hann1d = [](int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / (n - 1)));
    return v;
  };
  const auto wy = hann1d(h);
  const auto wx = hann1d(w);
  Tensor out(h, w, 1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) out.at(0, r, c) = static_cast<float>(wy[r] * wx[c]);
  }
  return out;
}

Tensor apply_window(const Tensor& features, const Tensor& window) {
  if (window.channels() != 1 || window.height() != features.height() || window.width() != features.width()) {
    throw ConfigError("apply_window: window does not match feature grid");
  }
  Tensor out = features;
  const auto wv = window.plane(0);
  for (int c = 0; c < out.channels(); ++c) {
    auto p = out.plane(c);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] *= wv[i];
  }
  return out;
}

Tensor kernel_correlation(const Tensor& x, const Tensor& z, const KcfParams& params) {
  if (!x.same_shape(z)) throw ConfigError("kernel_correlation: x and z differ in shape");
  const ComplexSpectrum k = kernel_map(fft2(x), fft2(z), params);
  Tensor out(k.height, k.width, 1);
  for (std::size_t i = 0; i < k.data.size(); ++i) out.data()[i] = static_cast<float>(k.data[i].real());
  return out;
}

KcfModel train_model(const Tensor& features, const KcfParams& params) {
  params.validate();
  KcfModel model;
  model.grid_h = features.height();
  model.grid_w = features.width();
  model.channels = features.channels();
  const double sigma = params.output_sigma_factor * std::sqrt(static_cast<double>(model.grid_h) * model.grid_w);
  model.yf = fft2(gaussian_labels(model.grid_h, model.grid_w, sigma));
  model.hann = hann_window(model.grid_h, model.grid_w);
  Trained t = solve(features, model.yf, params);
  model.xf = std::move(t.xf);
  model.alphaf = std::move(t.alphaf);
  return model;
}

Tensor detect(const KcfModel& model, const Tensor& features, const KcfParams& params, double& max_imag_residue) {
  check_grid(model, features, "detect");
  // k^{zx}: correlation of the new patch against the template, so a patch
  // shifted by d moves the response peak by +d.
  const ComplexSpectrum kf = fft2_complex(kernel_map(fft2(features), model.xf, params));
  ComplexSpectrum product(kf.height, kf.width, 1);
  for (std::size_t i = 0; i < kf.data.size(); ++i) product.data[i] = kf.data[i] * model.alphaf.data[i];
  const ComplexSpectrum response = ifft2_complex(product);
  Tensor out(response.height, response.width, 1);
  max_imag_residue = 0.0;
  for (std::size_t i = 0; i < response.data.size(); ++i) {
    out.data()[i] = static_cast<float>(response.data[i].real());
    max_imag_residue = std::max(max_imag_residue, std::abs(response.data[i].imag()));
  }
  return out;
}

Tensor detect(const KcfModel& model, const Tensor& features, const KcfParams& params) {
  double residue = 0.0;
  return detect(model, features, params, residue);
}

void update_model(KcfModel& model, const Tensor& new_features, double eta, const KcfParams& params) {
  check_grid(model, new_features, "update_model");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("update_model: eta must lie in [0, 1]");
  if (eta == 0.0) return;
  Trained t = solve(new_features, model.yf, params);
  if (eta == 1.0) {
    model.xf = std::move(t.xf);
    model.alphaf = std::move(t.alphaf);
    return;
  }
  for (std::size_t i = 0; i < model.xf.data.size(); ++i) {
    model.xf.data[i] = (1.0 - eta) * model.xf.data[i] + eta * t.xf.data[i];
  }
  for (std::size_t i = 0; i < model.alphaf.data.size(); ++i) {
    model.alphaf.data[i] = (1.0 - eta) * model.alphaf.data[i] + eta * t.alphaf.data[i];
  }
}

Peak find_peak(const Tensor& response) {
  Peak peak;
  const auto v = response.plane(0);
  std::size_t best = 0;
  float lo = v[0];
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
    lo = std::min(lo, v[i]);
  }
  peak.row = static_cast<int>(best / response.width());
  peak.col = static_cast<int>(best % response.width());
  peak.value = v[best];
  peak.flat = (v[best] == lo);
  return peak;
}

}  // namespace msdat
