#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "msdat/network.hpp"
#include "msdat/ops.hpp"
#include "msdat/tensor.hpp"

namespace msdat {

/// One adaptation filter type: an odd s x s convolution from the K source
/// channels to a slice of the reduced output.
struct ScaleFilter {
  int kernel_size = 3;
  ConvWeights conv;
};

enum class AdapterMode { learned, identity, random };

/// Channel-reducing adaptation for one tapped layer.
///
/// learned:  every ScaleFilter runs with "same" padding and stride 1 and the
///           outputs are concatenated in scale order; they must sum to K/8.
/// identity: features pass through untouched (plain hierarchical features).
/// random:   a seeded, sorted subset of K/8 source channels is kept.
struct AdapterBank {
  std::string source_tap;
  int in_channels = 0;  // K; 0 means "any" and is only legal in identity mode
  AdapterMode mode = AdapterMode::identity;
  std::vector<ScaleFilter> scales;
  std::uint64_t seed = 0;
  std::vector<int> selected;  // random mode only

  int out_channels() const;
};

inline constexpr int kReductionRatio = 8;

/// Throws ConfigError if the bank violates its mode's channel invariants.
void validate(const AdapterBank& bank);

Tensor apply_adapter(const Tensor& features, const AdapterBank& bank);

/// Uniform sample of K*fraction channel indices without replacement, sorted.
/// Draws come from std::mt19937_64 seeded with `seed` driving a
/// Fisher-Yates shuffle from the last index down (index j for position i is
/// r % (i+1) with rejection of r below 2^64 mod (i+1)); the first K*fraction
/// shuffled indices are kept. The result is identical on every platform.
std::vector<int> random_select_channels(int channels, double fraction, std::uint64_t seed);

AdapterBank make_identity_bank(const std::string& tap);
AdapterBank make_random_bank(const std::string& tap, int channels, std::uint64_t seed);

/// Learned-mode bank with K/(8*|kernels|) outputs per kernel size and
/// weights drawn N(0, 1/fan_in) from `seed`; biases are zero.
AdapterBank make_learned_bank(const std::string& tap, int channels, const std::vector<int>& kernels,
                              std::uint64_t seed);

/// Reads an adapter manifest (JSON with a banks[] section) and, when any bank
/// is learned, its weight blob named by the manifest's "blob" field.
std::vector<AdapterBank> load_adapter(const std::filesystem::path& manifest_path);

/// load_adapter plus a check that banks line up with `taps` one to one and
/// in order, with K equal to each tap's channel count.
std::vector<AdapterBank> load_adapter(const std::filesystem::path& manifest_path, const std::vector<TapShape>& taps);

void check_against_taps(const std::vector<AdapterBank>& banks, const std::vector<TapShape>& taps);

/// Writes banks in the format load_adapter reads. The blob is written only
/// when a learned bank is present.
void save_adapter(const std::filesystem::path& manifest_path, const std::filesystem::path& blob_path,
                  const std::vector<AdapterBank>& banks);

std::string to_string(AdapterMode mode);

}  // namespace msdat
