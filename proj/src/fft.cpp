#include "msdat/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace msdat {

namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per (grid, direction) and never freed.
// FFTW_ESTIMATE keeps the chosen algorithm independent of timing, so results
// are reproducible run to run.
fftw_plan plan_for(int height, int width, int sign) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto key = std::make_tuple(height, width, sign);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  fftw_complex* scratch = fftw_alloc_complex(static_cast<std::size_t>(height) * width);
  fftw_plan plan = fftw_plan_dft_2d(height, width, scratch, scratch, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(scratch);
  plans.emplace(key, plan);
  return plan;
}

void execute_planes(ComplexSpectrum& s, int sign) {
  fftw_plan plan = plan_for(s.height, s.width, sign);
  for (int c = 0; c < s.channels; ++c) {
    auto* buf = reinterpret_cast<fftw_complex*>(s.plane(c).data());
    fftw_execute_dft(plan, buf, buf);
  }
}

}  // namespace

ComplexSpectrum fft2(const Tensor& input) {
  ComplexSpectrum s(input.height(), input.width(), input.channels());
  const auto src = input.data();
  for (std::size_t i = 0; i < src.size(); ++i) s.data[i] = {src[i], 0.0};
  execute_planes(s, FFTW_FORWARD);
  return s;
}

ComplexSpectrum fft2_complex(const ComplexSpectrum& input) {
  ComplexSpectrum s = input;
  execute_planes(s, FFTW_FORWARD);
  return s;
}

ComplexSpectrum ifft2_complex(const ComplexSpectrum& spectrum) {
  ComplexSpectrum s = spectrum;
  execute_planes(s, FFTW_BACKWARD);
  const double norm = 1.0 / static_cast<double>(s.plane_size());
  for (auto& v : s.data) v *= norm;
  return s;
}

Tensor ifft2(const ComplexSpectrum& spectrum) {
  const ComplexSpectrum s = ifft2_complex(spectrum);
  Tensor out(s.height, s.width, s.channels);
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(s.data[i].real());
  return out;
}

}  // namespace msdat
