#include <random>

#include "doctest.h"
#include "msdat/error.hpp"
#include "msdat/fft.hpp"
#include "msdat/ops.hpp"
#include "test_support.hpp"

using namespace msdat;
using namespace msdat::testing;

TEST_CASE("tensor rejects inconsistent shapes") {
  CHECK_THROWS_AS(Tensor(0, 4, 1), ConfigError);
  CHECK_THROWS_AS(Tensor(2, 2, 1, std::vector<float>(3)), ConfigError);
  Tensor t(2, 3, 4);
  CHECK(t.size() == 24);
}

TEST_CASE("conv2d identity and zero kernels") {
  std::mt19937 gen(1);
  const Tensor x = random_tensor(4, 4, 1, gen);
  const ConvWeights identity{1, 1, 1, 1, {1.0f}, {0.0f}};
  CHECK(conv2d(x, identity, 1, 0) == x);

  const Tensor y = random_tensor(5, 7, 3, gen);
  const ConvWeights zero{2, 3, 3, 3, std::vector<float>(54, 0.0f), {0.25f, -1.5f}};
  const Tensor out = conv2d(y, zero, 1, 1);
  REQUIRE(out.height() == 5);
  REQUIRE(out.width() == 7);
  for (int c = 0; c < 2; ++c) {
    for (float v : out.plane(c)) CHECK(v == zero.bias[c]);
  }
}

TEST_CASE("conv2d matches direct convolution") {
  std::mt19937 gen(2);
  const Tensor x = random_tensor(6, 6, 3, gen);
  const ConvWeights w = random_conv(2, 3, 3, 3, gen);
  CHECK(max_abs_diff(conv2d(x, w, 1, 1), direct_conv(x, w, 1, 1)) < 1e-4);

  for (int trial = 0; trial < 20; ++trial) {
    const int h = 3 + static_cast<int>(gen() % 6), wd = 3 + static_cast<int>(gen() % 6);
    const int cin = 1 + static_cast<int>(gen() % 4), cout = 1 + static_cast<int>(gen() % 4);
    const int k = 1 + 2 * static_cast<int>(gen() % 2);
    const int stride = 1 + static_cast<int>(gen() % 2);
    const int pad = static_cast<int>(gen() % 2);
    const Tensor xi = random_tensor(h, wd, cin, gen);
    const ConvWeights wi = random_conv(cout, cin, k, k, gen);
    const Tensor got = conv2d(xi, wi, stride, pad);
    const Tensor want = direct_conv(xi, wi, stride, pad);
    REQUIRE(got.same_shape(want));
    CHECK(max_abs_diff(got, want) < 1e-4);
  }
}

TEST_CASE("conv2d output size follows floor rule") {
  std::mt19937 gen(3);
  const Tensor x = random_tensor(7, 9, 2, gen);
  const ConvWeights w = random_conv(4, 2, 3, 3, gen);
  const Tensor out = conv2d(x, w, 2, 1);
  CHECK(out.height() == (7 + 2 - 3) / 2 + 1);
  CHECK(out.width() == (9 + 2 - 3) / 2 + 1);
  CHECK(out.channels() == 4);
}

TEST_CASE("conv2d is linear with zero bias") {
  std::mt19937 gen(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor a = random_tensor(6, 5, 3, gen);
    const Tensor b = random_tensor(6, 5, 3, gen);
    const ConvWeights w = random_conv(2, 3, 3, 3, gen, true);
    const float alpha = 0.7f, beta = -1.3f;
    Tensor mix(6, 5, 3);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = alpha * a.data()[i] + beta * b.data()[i];
    const Tensor lhs = conv2d(mix, w, 1, 1);
    const Tensor ca = conv2d(a, w, 1, 1), cb = conv2d(b, w, 1, 1);
    Tensor rhs(lhs.height(), lhs.width(), lhs.channels());
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs.data()[i] = alpha * ca.data()[i] + beta * cb.data()[i];
    CHECK(max_abs_diff(lhs, rhs) < 1e-4);
  }
}

TEST_CASE("conv2d shape mismatch names the layer") {
  std::mt19937 gen(5);
  const Tensor x = random_tensor(4, 4, 2, gen);
  const ConvWeights w = random_conv(1, 3, 1, 1, gen);
  try {
    conv2d(x, w, 1, 0, "conv9_9");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("conv9_9") != std::string::npos);
  }
}

TEST_CASE("relu") {
  const Tensor x(1, 3, 1, std::vector<float>{-1.0f, 0.0f, 2.0f});
  CHECK(relu(x) == Tensor(1, 3, 1, std::vector<float>{0.0f, 0.0f, 2.0f}));
  const Tensor pos(2, 2, 1, std::vector<float>{0.0f, 1.0f, 2.0f, 3.0f});
  CHECK(relu(pos) == pos);
  const Tensor neg(2, 2, 1, -3.0f);
  CHECK(relu(neg) == Tensor(2, 2, 1, 0.0f));
}

TEST_CASE("max_pool2d") {
  const Tensor x(2, 2, 1, std::vector<float>{1, 2, 3, 4});
  const Tensor p = max_pool2d(x, 2, 2);
  CHECK(p.height() == 1);
  CHECK(p.at(0, 0, 0) == 4.0f);

  CHECK(max_pool2d(Tensor(6, 6, 2, 3.5f), 2, 2) == Tensor(3, 3, 2, 3.5f));

  std::mt19937 gen(6);
  const Tensor r = random_tensor(8, 8, 2, gen);
  CHECK(max_pool2d(r, 2, 2) == direct_max_pool(r, 2, 2));
  const Tensor odd = random_tensor(7, 5, 3, gen);
  CHECK(max_pool2d(odd, 3, 2) == direct_max_pool(odd, 3, 2));

  CHECK_THROWS_AS(max_pool2d(Tensor(1, 4, 1), 2, 2), ConfigError);
}

TEST_CASE("bilinear_resize") {
  std::mt19937 gen(7);
  const Tensor x = random_tensor(5, 6, 2, gen);
  CHECK(max_abs_diff(bilinear_resize(x, 5, 6), x) < 1e-6);

  const Tensor flat = bilinear_resize(Tensor(4, 4, 2, 2.5f), 7, 3);
  CHECK(flat.height() == 7);
  CHECK(flat.width() == 3);
  for (float v : flat.data()) CHECK(v == doctest::Approx(2.5f));

  const Tensor quad(2, 2, 1, std::vector<float>{0, 1, 2, 3});
  const Tensor up = bilinear_resize(quad, 3, 3);
  CHECK(up.at(0, 1, 1) == doctest::Approx(1.5f));
  CHECK(up.at(0, 0, 0) == 0.0f);
  CHECK(up.at(0, 2, 2) == 3.0f);

  for (int trial = 0; trial < 10; ++trial) {
    const Tensor r = random_tensor(2 + static_cast<int>(gen() % 7), 2 + static_cast<int>(gen() % 7), 3, gen);
    const int oh = 1 + static_cast<int>(gen() % 8), ow = 1 + static_cast<int>(gen() % 8);
    CHECK(max_abs_diff(bilinear_resize(r, oh, ow), direct_resize(r, oh, ow)) < 1e-4);
  }
}

TEST_CASE("fft2 of a delta is flat") {
  Tensor delta(8, 6, 1, 0.0f);
  delta.at(0, 0, 0) = 1.0f;
  const ComplexSpectrum s = fft2(delta);
  for (const auto& v : s.data) {
    CHECK(v.real() == doctest::Approx(1.0));
    CHECK(v.imag() == doctest::Approx(0.0));
  }
}

TEST_CASE("fft2 round trip and Parseval") {
  std::mt19937 gen(8);
  const Tensor x = random_tensor(16, 16, 2, gen);
  const ComplexSpectrum s = fft2(x);
  CHECK(max_abs_diff(ifft2(s), x) < 1e-5);

  double energy = 0.0, spectral = 0.0;
  for (float v : x.data()) energy += static_cast<double>(v) * v;
  for (const auto& v : s.data) spectral += std::norm(v);
  spectral /= 16.0 * 16.0;
  CHECK(std::abs(energy - spectral) / energy < 1e-4);

  const Tensor odd = random_tensor(7, 11, 1, gen);
  CHECK(max_abs_diff(ifft2(fft2(odd)), odd) < 1e-5);
}

TEST_CASE("fft2 matches a direct DFT") {
  std::mt19937 gen(9);
  const Tensor x = random_tensor(5, 4, 1, gen);
  const ComplexSpectrum s = fft2(x);
  for (int u = 0; u < 5; ++u) {
    for (int v = 0; v < 4; ++v) {
      std::complex<double> sum = 0.0;
      for (int y = 0; y < 5; ++y) {
        for (int xx = 0; xx < 4; ++xx) {
          const double ang = -2.0 * M_PI * (u * y / 5.0 + v * xx / 4.0);
          sum += static_cast<double>(x.at(0, y, xx)) * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      }
      CHECK(std::abs(s.data[u * 4 + v] - sum) < 1e-5);
    }
  }
}
