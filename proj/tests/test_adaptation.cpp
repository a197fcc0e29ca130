#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "msdat/adaptation.hpp"
#include "msdat/error.hpp"
#include "test_support.hpp"

using namespace msdat;
using namespace msdat::testing;

namespace {

// Reference for random_select_channels: shuffle 0..K-1 with the documented
// draw rule, keep the first K*fraction, sort.
std::vector<int> shuffle_then_truncate(int k, int keep, std::uint64_t seed) {
  std::vector<int> v;
  for (int i = 0; i < k; ++i) v.push_back(i);
  std::mt19937_64 gen(seed);
  for (int i = k - 1; i >= 1; --i) {
    const std::uint64_t n = static_cast<std::uint64_t>(i) + 1;
    const std::uint64_t reject_below = (std::numeric_limits<std::uint64_t>::max() - n + 1) % n;
    std::uint64_t r;
    do {
      r = gen();
    } while (r < reject_below);
    const int j = static_cast<int>(r % n);
    const int tmp = v[i];
    v[i] = v[j];
    v[j] = tmp;
  }
  std::vector<int> kept(v.begin(), v.begin() + keep);
  std::sort(kept.begin(), kept.end());
  return kept;
}

AdapterBank bank_with(int k, const std::vector<std::pair<int, int>>& kernel_out, std::mt19937& gen, bool zero_bias = false) {
  AdapterBank b;
  b.source_tap = "tap";
  b.in_channels = k;
  b.mode = AdapterMode::learned;
  for (auto [kernel, out] : kernel_out) b.scales.push_back({kernel, random_conv(out, k, kernel, kernel, gen, zero_bias)});
  return b;
}

}  // namespace

TEST_CASE("identity mode passes features through") {
  std::mt19937 gen(1);
  const Tensor x = random_tensor(5, 6, 7, gen);
  CHECK(apply_adapter(x, make_identity_bank("t")) == x);
}

TEST_CASE("learned mode reduces 8:1 and keeps the spatial size") {
  std::mt19937 gen(2);
  const AdapterBank bank = make_learned_bank("conv3", 256, {3, 5}, 7);
  REQUIRE(bank.scales.size() == 2);
  CHECK(bank.scales[0].conv.out_channels == 16);
  CHECK(bank.scales[1].conv.out_channels == 16);
  const Tensor x = random_tensor(9, 11, 256, gen);
  const Tensor y = apply_adapter(x, bank);
  CHECK(y.channels() == 32);
  CHECK(y.height() == 9);
  CHECK(y.width() == 11);

  const AdapterBank three = make_learned_bank("conv4", 48, {1, 3, 5}, 3);
  CHECK(apply_adapter(random_tensor(4, 4, 48, gen), three).channels() == 6);
}

TEST_CASE("learned mode matches per-scale direct convolution and concatenation") {
  std::mt19937 gen(3);
  const AdapterBank bank = bank_with(16, {{3, 1}, {5, 1}}, gen);
  const Tensor x = random_tensor(8, 8, 16, gen);
  const Tensor y = apply_adapter(x, bank);
  const Tensor a = direct_conv(x, bank.scales[0].conv, 1, 1);
  const Tensor b = direct_conv(x, bank.scales[1].conv, 1, 2);
  REQUIRE(y.channels() == 2);
  double err = 0.0;
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      err = std::max(err, std::abs(static_cast<double>(y.at(0, r, c)) - a.at(0, r, c)));
      err = std::max(err, std::abs(static_cast<double>(y.at(1, r, c)) - b.at(0, r, c)));
    }
  }
  CHECK(err < 1e-4);
}

TEST_CASE("learned mode is linear with zero bias") {
  std::mt19937 gen(4);
  const AdapterBank bank = bank_with(16, {{3, 1}, {5, 1}}, gen, true);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor a = random_tensor(6, 7, 16, gen);
    const Tensor b = random_tensor(6, 7, 16, gen);
    Tensor sum(6, 7, 16);
    for (std::size_t i = 0; i < sum.size(); ++i) sum.data()[i] = a.data()[i] + 2.0f * b.data()[i];
    const Tensor ya = apply_adapter(a, bank), yb = apply_adapter(b, bank), ys = apply_adapter(sum, bank);
    Tensor expect(ys.height(), ys.width(), ys.channels());
    for (std::size_t i = 0; i < expect.size(); ++i) expect.data()[i] = ya.data()[i] + 2.0f * yb.data()[i];
    CHECK(max_abs_diff(ys, expect) < 1e-4);
  }
}

TEST_CASE("adapter rejects channel mismatches and even kernels") {
  std::mt19937 gen(5);
  const AdapterBank bank = make_learned_bank("t", 16, {3, 5}, 1);
  CHECK_THROWS_AS(apply_adapter(random_tensor(4, 4, 8, gen), bank), ConfigError);
  AdapterBank even = bank_with(16, {{2, 1}, {3, 1}}, gen);
  CHECK_THROWS_AS(validate(even), ConfigError);
  CHECK_THROWS_AS(apply_adapter(random_tensor(4, 4, 16, gen), even), ConfigError);
  const AdapterBank quarter = bank_with(16, {{3, 2}, {5, 2}}, gen);
  CHECK_THROWS_AS(validate(quarter), ConfigError);
}

TEST_CASE("random channel selection") {
  const auto one = random_select_channels(8, 1.0 / 8, 42);
  REQUIRE(one.size() == 1);
  CHECK(one[0] >= 0);
  CHECK(one[0] < 8);

  CHECK(random_select_channels(512, 0.125, 9) == random_select_channels(512, 0.125, 9));
  CHECK(random_select_channels(512, 0.125, 9) != random_select_channels(512, 0.125, 10));

  for (std::uint64_t seed : {0ull, 1ull, 17ull, 123456789ull}) {
    const auto got = random_select_channels(512, 0.125, seed);
    CHECK(got == shuffle_then_truncate(512, 64, seed));
    CHECK(std::set<int>(got.begin(), got.end()).size() == 64);
    CHECK(std::is_sorted(got.begin(), got.end()));
  }
  CHECK(random_select_channels(256, 0.125, 5) == shuffle_then_truncate(256, 32, 5));

  CHECK_THROWS_AS(random_select_channels(12, 0.125, 1), ConfigError);
}

TEST_CASE("random mode extracts the selected planes") {
  std::mt19937 gen(6);
  const AdapterBank bank = make_random_bank("t", 64, 11);
  const Tensor x = random_tensor(5, 5, 64, gen);
  const Tensor y = apply_adapter(x, bank);
  REQUIRE(y.channels() == 8);
  for (int i = 0; i < 8; ++i) {
    const auto src = x.plane(bank.selected[i]);
    const auto dst = y.plane(i);
    CHECK(std::equal(src.begin(), src.end(), dst.begin()));
  }
}

TEST_CASE("adapter files: learned, identity and invariant violations") {
  TempDir dir("adapter");
  std::mt19937 gen(7);
  const AdapterBank learned = bank_with(16, {{3, 1}, {5, 1}}, gen);
  AdapterBank ident = make_identity_bank("b");
  AdapterBank rnd = make_random_bank("c", 64, 3);
  AdapterBank named = learned;
  named.source_tap = "a";
  save_adapter(dir / "ad.json", dir / "ad.bin", {named, ident, rnd});

  const auto banks = load_adapter(dir / "ad.json");
  REQUIRE(banks.size() == 3);
  CHECK(banks[0].mode == AdapterMode::learned);
  CHECK(banks[1].mode == AdapterMode::identity);
  CHECK(banks[2].selected == rnd.selected);
  const Tensor x = random_tensor(8, 8, 16, gen);
  CHECK(apply_adapter(x, banks[0]) == apply_adapter(x, named));

  save_adapter(dir / "id.json", dir / "id.bin", {ident});
  CHECK_FALSE(std::filesystem::exists(dir / "id.bin"));
  CHECK(load_adapter(dir / "id.json").front().mode == AdapterMode::identity);

  nlohmann::json bad = nlohmann::json::parse(std::ifstream(dir / "ad.json"));
  bad["banks"][0]["scales"][0]["out"] = 2;
  bad["banks"][0]["scales"][1]["out"] = 2;
  std::ofstream(dir / "bad.json") << bad.dump();
  CHECK_THROWS_AS(load_adapter(dir / "bad.json"), ConfigError);

  std::filesystem::resize_file(dir / "ad.bin", std::filesystem::file_size(dir / "ad.bin") - 16);
  CHECK_THROWS_AS(load_adapter(dir / "ad.json"), DataError);
}

TEST_CASE("adapter banks are checked against the backbone taps") {
  TempDir dir("adapter_taps");
  const auto taps = tap_shapes(vgg19_backbone(), 224, 224);
  std::vector<AdapterBank> banks;
  for (const auto& t : taps) banks.push_back(make_learned_bank(t.name, t.channels, {3, 5}, 1));
  CHECK(banks[0].out_channels() == 32);
  CHECK(banks[1].out_channels() == 64);
  CHECK(banks[2].out_channels() == 64);
  save_adapter(dir / "vgg_ad.json", dir / "vgg_ad.bin", banks);
  const auto loaded = load_adapter(dir / "vgg_ad.json", taps);
  CHECK(loaded.size() == 3);

  std::swap(banks[0], banks[1]);
  CHECK_THROWS_AS(check_against_taps(banks, taps), ConfigError);
  banks.pop_back();
  CHECK_THROWS_AS(check_against_taps(banks, taps), ConfigError);
}
