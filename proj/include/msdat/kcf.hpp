#pragma once

#include "msdat/tensor.hpp"

namespace msdat {

enum class KernelType { gaussian, linear };

struct KcfParams {
  KernelType kernel = KernelType::gaussian;
  double kernel_sigma = 0.5;
  double lambda = 1e-4;
  /// Model interpolation rate.
  double eta = 0.01;
  /// Label sigma = output_sigma_factor * sqrt(grid_h * grid_w).
  double output_sigma_factor = 0.1;
  /// KCF window side over target side.
  double window_scale = 2.5;

  void validate() const;
};

/// Fourier-domain state of one correlation filter. `xf` and `alphaf` are
/// interpolated by update_model; `yf` and `hann` never change after training.
struct KcfModel {
  int grid_h = 0;
  int grid_w = 0;
  int channels = 0;
  ComplexSpectrum xf;
  ComplexSpectrum alphaf;
  ComplexSpectrum yf;
  Tensor hann;
};

/// Gaussian regression target peaking at (h/2, w/2) with circular distances.
Tensor gaussian_labels(int h, int w, double sigma);

/// Outer product of two 1-D Hann windows 0.5 * (1 - cos(2*pi*n / (N-1))).
Tensor hann_window(int h, int w);

/// Multiplies every channel by a single-channel window.
Tensor apply_window(const Tensor& features, const Tensor& window);

/// Kernel map k^{xz} over all circular shifts. With
/// corr = real(ifft2(sum_c fft(x_c) * conj(fft(z_c)))):
///   gaussian: exp(-max(0, |x|^2 + |z|^2 - 2 corr) / (sigma^2 * H * W * C))
///   linear:   corr / (H * W * C)
Tensor kernel_correlation(const Tensor& x, const Tensor& z, const KcfParams& params);

/// Closed-form ridge regression over all circular shifts of `features`
/// (already windowed and on the model grid).
KcfModel train_model(const Tensor& features, const KcfParams& params);

/// Response map for `features` on the model grid; argmax minus the centre
/// cell is the estimated displacement.
Tensor detect(const KcfModel& model, const Tensor& features, const KcfParams& params);

/// detect() that also reports the largest |imaginary part| left by the
/// inverse transform before it is discarded.
Tensor detect(const KcfModel& model, const Tensor& features, const KcfParams& params, double& max_imag_residue);

/// Running interpolation of xf and alphaf toward a model trained on
/// `new_features`. eta = 0 leaves the model untouched and eta = 1 replaces it.
void update_model(KcfModel& model, const Tensor& new_features, double eta, const KcfParams& params);

struct Peak {
  int row = 0;
  int col = 0;
  float value = 0.0f;
  bool flat = false;
};

/// Largest value; ties go to the smallest row-major index. `flat` is set
/// when every value is equal.
Peak find_peak(const Tensor& response);

}  // namespace msdat
