#include <random>

#include "doctest.h"
#include "msdat/error.hpp"
#include "msdat/fft.hpp"
#include "msdat/kcf.hpp"
#include "test_support.hpp"

using namespace msdat;
using namespace msdat::testing;

namespace {

double spectral_distance(const KcfModel& a, const KcfModel& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.xf.data.size(); ++i) d += std::norm(a.xf.data[i] - b.xf.data[i]);
  for (std::size_t i = 0; i < a.alphaf.data.size(); ++i) d += std::norm(a.alphaf.data[i] - b.alphaf.data[i]);
  return std::sqrt(d);
}

Tensor windowed_random(int h, int w, int c, std::mt19937& gen) {
  return apply_window(random_tensor(h, w, c, gen), hann_window(h, w));
}

}  // namespace

TEST_CASE("gaussian labels") {
  const double sigma = 2.0;
  const Tensor y = gaussian_labels(9, 12, sigma);
  CHECK(y.at(0, 4, 6) == 1.0f);
  CHECK(y.at(0, 4, 7) == doctest::Approx(std::exp(-1.0 / (2 * sigma * sigma))));
  CHECK(y.at(0, 4, 5) == y.at(0, 4, 7));
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 12; ++c) {
      int dr = std::abs(r - 4), dc = std::abs(c - 6);
      dr = std::min(dr, 9 - dr);
      dc = std::min(dc, 12 - dc);
      CHECK(y.at(0, r, c) == static_cast<float>(std::exp(-(dr * dr + dc * dc) / (2 * sigma * sigma))));
    }
  }
  CHECK_THROWS_AS(gaussian_labels(2, 5, 1.0), ConfigError);
}

TEST_CASE("hann window") {
  const Tensor w = hann_window(8, 8);
  CHECK(w.at(0, 0, 0) == 0.0f);
  CHECK(w.at(0, 7, 7) == doctest::Approx(0.0f));
  CHECK(hann_window(3, 3).at(0, 1, 1) == doctest::Approx(1.0f));
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      const double a = 0.5 * (1 - std::cos(2 * M_PI * r / 7.0));
      const double b = 0.5 * (1 - std::cos(2 * M_PI * c / 7.0));
      CHECK(w.at(0, r, c) == doctest::Approx(a * b).epsilon(1e-6));
      CHECK(w.at(0, r, c) >= 0.0f);
      CHECK(w.at(0, r, c) <= 1.0f);
    }
  }
}

TEST_CASE("gaussian kernel basics") {
  std::mt19937 gen(1);
  KcfParams p;
  const Tensor x = windowed_random(10, 12, 3, gen);
  const Tensor kxx = kernel_correlation(x, x, p);
  CHECK(kxx.at(0, 0, 0) == doctest::Approx(1.0f));
  for (float v : kxx.data()) {
    CHECK(v > 0.0f);
    CHECK(v <= 1.0f);
  }
  const Tensor zeros(6, 6, 2, 0.0f);
  const Tensor k00 = kernel_correlation(zeros, zeros, p);
  for (float v : k00.data()) CHECK(v == 1.0f);
  CHECK_THROWS_AS(kernel_correlation(x, Tensor(10, 12, 2), p), ConfigError);
}

TEST_CASE("linear kernel equals spatial circular cross-correlation") {
  std::mt19937 gen(2);
  KcfParams p;
  p.kernel = KernelType::linear;
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = random_tensor(8, 8, 3, gen);
    const Tensor z = random_tensor(8, 8, 3, gen);
    CHECK(max_abs_diff(kernel_correlation(x, z, p), direct_linear_kernel(x, z)) < 1e-4);
  }
  const Tensor x = random_tensor(5, 7, 4, gen);
  const Tensor z = random_tensor(5, 7, 4, gen);
  CHECK(max_abs_diff(kernel_correlation(x, z, p), direct_linear_kernel(x, z)) < 1e-4);
}

TEST_CASE("kernel map flips under argument swap") {
  std::mt19937 gen(3);
  for (KernelType kind : {KernelType::gaussian, KernelType::linear}) {
    KcfParams p;
    p.kernel = kind;
    const Tensor x = windowed_random(9, 8, 2, gen);
    const Tensor z = windowed_random(9, 8, 2, gen);
    const Tensor kxz = kernel_correlation(x, z, p);
    const Tensor kzx = kernel_correlation(z, x, p);
    double err = 0.0;
    for (int r = 0; r < 9; ++r) {
      for (int c = 0; c < 8; ++c) err = std::max(err, std::abs(double(kxz.at(0, r, c)) - kzx.at(0, (9 - r) % 9, (8 - c) % 8)));
    }
    CHECK(err < 1e-5);
  }
}

TEST_CASE("self-detection peaks at the centre") {
  std::mt19937 gen(4);
  KcfParams p;
  for (auto [h, w] : {std::pair{32, 32}, std::pair{31, 40}, std::pair{17, 23}}) {
    const Tensor x = windowed_random(h, w, 4, gen);
    const KcfModel m = train_model(x, p);
    const auto [r, c] = argmax2d(detect(m, x, p));
    CHECK(r == h / 2);
    CHECK(c == w / 2);
  }
}

TEST_CASE("circular shifts are recovered exactly") {
  std::mt19937 gen(5);
  for (KernelType kind : {KernelType::gaussian, KernelType::linear}) {
    KcfParams p;
    p.kernel = kind;
    const int h = 32, w = 36;
    const Tensor x = windowed_random(h, w, 3, gen);
    const KcfModel m = train_model(x, p);
    const Tensor base = detect(m, x, p);
    CHECK(argmax2d(detect(m, circular_shift(x, 3, -2), p)) == std::pair{h / 2 + 3, w / 2 - 2});
    for (int trial = 0; trial < 20; ++trial) {
      const int dy = static_cast<int>(gen() % (h / 4)) * (gen() % 2 ? 1 : -1);
      const int dx = static_cast<int>(gen() % (w / 4)) * (gen() % 2 ? 1 : -1);
      const Tensor shifted = circular_shift(x, dy, dx);
      const Tensor resp = detect(m, shifted, p);
      CHECK(argmax2d(resp) == std::pair{h / 2 + dy, w / 2 + dx});
      // Shift equivariance of the whole map.
      CHECK(max_abs_diff(resp, circular_shift(base, dy, dx)) < 1e-4);
    }
  }
}

TEST_CASE("response is real up to round-off") {
  std::mt19937 gen(6);
  KcfParams p;
  const Tensor x = windowed_random(20, 24, 3, gen);
  const KcfModel m = train_model(x, p);
  double residue = 1.0;
  detect(m, windowed_random(20, 24, 3, gen), p, residue);
  CHECK(residue < 1e-5);
}

TEST_CASE("heavy regularization flattens the response") {
  std::mt19937 gen(7);
  KcfParams p;
  p.lambda = 1e6;
  const Tensor x = windowed_random(16, 16, 3, gen);
  const KcfModel m = train_model(x, p);
  const Tensor resp = detect(m, x, p);
  for (float v : resp.data()) CHECK(std::abs(v) < 1e-3);
}

TEST_CASE("zeroed features give a flat response") {
  std::mt19937 gen(8);
  KcfParams p;
  const Tensor x = windowed_random(12, 12, 2, gen);
  const KcfModel m = train_model(x, p);
  const Tensor resp = detect(m, Tensor(12, 12, 2, 0.0f), p);
  const auto [lo, hi] = std::minmax_element(resp.data().begin(), resp.data().end());
  CHECK(*hi - *lo < 1e-6f * std::max(1.0f, std::abs(*hi)));
}

TEST_CASE("training is deterministic") {
  std::mt19937 gen(9);
  KcfParams p;
  const Tensor x = windowed_random(14, 18, 5, gen);
  const KcfModel a = train_model(x, p);
  const KcfModel b = train_model(x, p);
  CHECK(a.xf == b.xf);
  CHECK(a.alphaf == b.alphaf);
  CHECK(a.yf == b.yf);
}

TEST_CASE("update_model interpolation identities") {
  std::mt19937 gen(10);
  KcfParams p;
  const Tensor x = windowed_random(16, 16, 3, gen);
  const Tensor z = windowed_random(16, 16, 3, gen);
  const KcfModel trained_x = train_model(x, p);
  const KcfModel trained_z = train_model(z, p);

  KcfModel m = trained_x;
  update_model(m, z, 0.0, p);
  CHECK(m.xf == trained_x.xf);
  CHECK(m.alphaf == trained_x.alphaf);

  update_model(m, z, 1.0, p);
  CHECK(m.xf == trained_z.xf);
  CHECK(m.alphaf == trained_z.alphaf);
  CHECK(m.yf == trained_x.yf);
  CHECK(m.hann == trained_x.hann);

  KcfModel conv = trained_x;
  double prev = spectral_distance(conv, trained_z);
  for (int i = 0; i < 6; ++i) {
    update_model(conv, z, 0.5, p);
    const double d = spectral_distance(conv, trained_z);
    CHECK(d < prev);
    prev = d;
  }
  CHECK_THROWS_AS(update_model(conv, Tensor(8, 8, 3), 0.5, p), ConfigError);
}

TEST_CASE("params validation and peak tie-breaking") {
  KcfParams p;
  p.lambda = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = KcfParams{};
  p.eta = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = KcfParams{};
  p.window_scale = 1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  const Peak flat = find_peak(Tensor(4, 5, 1, 2.0f));
  CHECK(flat.flat);
  CHECK(flat.row == 0);
  CHECK(flat.col == 0);
  Tensor two(3, 3, 1, 0.0f);
  two.at(0, 2, 1) = 5.0f;
  two.at(0, 1, 2) = 5.0f;
  const Peak tie = find_peak(two);
  CHECK_FALSE(tie.flat);
  CHECK(tie.row == 1);
  CHECK(tie.col == 2);
}
