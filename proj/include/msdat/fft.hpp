#pragma once

#include "msdat/tensor.hpp"

namespace msdat {

/// Unnormalized forward 2-D DFT of every channel plane.
ComplexSpectrum fft2(const Tensor& input);

/// Unnormalized forward 2-D DFT of a complex input.
ComplexSpectrum fft2_complex(const ComplexSpectrum& input);

/// Inverse 2-D DFT normalized by 1/(H*W), complex result.
ComplexSpectrum ifft2_complex(const ComplexSpectrum& spectrum);

/// Real part of ifft2_complex.
Tensor ifft2(const ComplexSpectrum& spectrum);

}  // namespace msdat
