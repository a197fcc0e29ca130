#include "msdat/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"
#include "msdat/blob.hpp"
#include "msdat/error.hpp"

namespace msdat {

using nlohmann::json;

std::string to_string(AdapterMode mode) {
  switch (mode) {
    case AdapterMode::learned: return "learned";
    case AdapterMode::identity: return "identity";
    case AdapterMode::random: return "random";
  }
  return "?";
}

namespace {

AdapterMode parse_mode(const std::string& text) {
  if (text == "learned") return AdapterMode::learned;
  if (text == "identity") return AdapterMode::identity;
  if (text == "random") return AdapterMode::random;
  throw DataError("unknown adapter mode '" + text + "'");
}

int reduced_channels(int channels, const std::string& tap) {
  if (channels < kReductionRatio || channels % kReductionRatio != 0) {
    throw ConfigError("bank '" + tap + "': source channel count " + std::to_string(channels) + " is not divisible by " +
                      std::to_string(kReductionRatio));
  }
  return channels / kReductionRatio;
}

}  // namespace

int AdapterBank::out_channels() const {
  switch (mode) {
    case AdapterMode::identity: return in_channels;
    case AdapterMode::random: return static_cast<int>(selected.size());
    case AdapterMode::learned: {
      int total = 0;
      for (const auto& s : scales) total += s.conv.out_channels;
      return total;
    }
  }
  return 0;
}

void validate(const AdapterBank& bank) {
  const std::string where = "bank '" + bank.source_tap + "'";
  switch (bank.mode) {
    case AdapterMode::identity:
      return;
    case AdapterMode::random: {
      const int want = reduced_channels(bank.in_channels, bank.source_tap);
      if (static_cast<int>(bank.selected.size()) != want) {
        throw ConfigError(where + ": random selection must keep " + std::to_string(want) + " channels");
      }
      for (std::size_t i = 0; i < bank.selected.size(); ++i) {
        if (bank.selected[i] < 0 || bank.selected[i] >= bank.in_channels ||
            (i > 0 && bank.selected[i] <= bank.selected[i - 1])) {
          throw ConfigError(where + ": selected channels must be unique, sorted and in range");
        }
      }
      return;
    }
    case AdapterMode::learned: {
      const int want = reduced_channels(bank.in_channels, bank.source_tap);
      if (bank.scales.empty()) throw ConfigError(where + ": learned bank has no scale filters");
      for (const auto& s : bank.scales) {
        if (s.kernel_size < 1 || s.kernel_size % 2 == 0) {
          throw ConfigError(where + ": kernel size " + std::to_string(s.kernel_size) + " must be odd");
        }
        const ConvWeights& c = s.conv;
        if (c.kernel_h != s.kernel_size || c.kernel_w != s.kernel_size || c.in_channels != bank.in_channels ||
            c.out_channels < 1 || c.weights.size() != c.weight_count() ||
            c.bias.size() != static_cast<std::size_t>(c.out_channels)) {
          throw ConfigError(where + ": scale " + std::to_string(s.kernel_size) + " weights do not match its shape");
        }
      }
      if (bank.out_channels() != want) {
        throw ConfigError(where + ": scale outputs sum to " + std::to_string(bank.out_channels()) + ", expected K/8 = " +
                          std::to_string(want));
      }
      return;
    }
  }
}

Tensor apply_adapter(const Tensor& features, const AdapterBank& bank) {
  if (bank.in_channels != 0 && features.channels() != bank.in_channels) {
    throw ConfigError("bank '" + bank.source_tap + "': features have " + std::to_string(features.channels()) +
                      " channels, bank expects " + std::to_string(bank.in_channels));
  }
  switch (bank.mode) {
    case AdapterMode::identity:
      return features;
    case AdapterMode::random: {
      Tensor out(features.height(), features.width(), static_cast<int>(bank.selected.size()));
      for (std::size_t i = 0; i < bank.selected.size(); ++i) {
        const auto src = features.plane(bank.selected[i]);
        std::copy(src.begin(), src.end(), out.plane(static_cast<int>(i)).begin());
      }
      return out;
    }
    case AdapterMode::learned: {
      Tensor out(features.height(), features.width(), bank.out_channels());
      int offset = 0;
      for (const auto& s : bank.scales) {
        if (s.kernel_size % 2 == 0) {
          throw ConfigError("bank '" + bank.source_tap + "': even kernel size " + std::to_string(s.kernel_size));
        }
        const Tensor part = conv2d(features, s.conv, 1, (s.kernel_size - 1) / 2,
                                   bank.source_tap + "/adapt" + std::to_string(s.kernel_size));
        std::copy(part.data().begin(), part.data().end(), out.plane(offset).begin());
        offset += part.channels();
      }
      return out;
    }
  }
  return features;
}

std::vector<int> random_select_channels(int channels, double fraction, std::uint64_t seed) {
  if (channels < 1 || fraction <= 0.0 || fraction > 1.0) {
    throw ConfigError("random_select_channels: need channels >= 1 and 0 < fraction <= 1");
  }
  const double exact = channels * fraction;
  const auto count = static_cast<int>(std::llround(exact));
  if (std::abs(exact - count) > 1e-9 || count < 1) {
    throw ConfigError("random_select_channels: " + std::to_string(channels) + " * " + std::to_string(fraction) +
                      " is not a positive integer");
  }
  std::vector<int> order(channels);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(seed);
  for (int i = channels - 1; i > 0; --i) {
    const std::uint64_t bound = static_cast<std::uint64_t>(i) + 1;
    const std::uint64_t threshold = (0 - bound) % bound;
    std::uint64_t r = gen();
    while (r < threshold) r = gen();
    std::swap(order[i], order[static_cast<std::size_t>(r % bound)]);
  }
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

AdapterBank make_identity_bank(const std::string& tap) {
  AdapterBank bank;
  bank.source_tap = tap;
  bank.mode = AdapterMode::identity;
  return bank;
}

AdapterBank make_random_bank(const std::string& tap, int channels, std::uint64_t seed) {
  AdapterBank bank;
  bank.source_tap = tap;
  bank.in_channels = channels;
  bank.mode = AdapterMode::random;
  bank.seed = seed;
  bank.selected = random_select_channels(channels, 1.0 / kReductionRatio, seed);
  return bank;
}

AdapterBank make_learned_bank(const std::string& tap, int channels, const std::vector<int>& kernels,
                              std::uint64_t seed) {
  const int reduced = reduced_channels(channels, tap);
  if (kernels.empty() || reduced % static_cast<int>(kernels.size()) != 0) {
    throw ConfigError("bank '" + tap + "': K/8 = " + std::to_string(reduced) + " does not split evenly over " +
                      std::to_string(kernels.size()) + " scales");
  }
  const int per_scale = reduced / static_cast<int>(kernels.size());
  AdapterBank bank;
  bank.source_tap = tap;
  bank.in_channels = channels;
  bank.mode = AdapterMode::learned;
  std::mt19937_64 gen(seed);
  for (int k : kernels) {
    ScaleFilter s;
    s.kernel_size = k;
    s.conv = ConvWeights{per_scale, channels, k, k, {}, std::vector<float>(per_scale, 0.0f)};
    std::normal_distribution<float> dist(0.0f, 1.0f / std::sqrt(static_cast<float>(channels * k * k)));
    s.conv.weights.resize(s.conv.weight_count());
    for (float& w : s.conv.weights) w = dist(gen);
    bank.scales.push_back(std::move(s));
  }
  validate(bank);
  return bank;
}

void check_against_taps(const std::vector<AdapterBank>& banks, const std::vector<TapShape>& taps) {
  if (banks.size() != taps.size()) {
    throw ConfigError("adapter has " + std::to_string(banks.size()) + " banks for " + std::to_string(taps.size()) +
                      " network taps");
  }
  for (std::size_t i = 0; i < banks.size(); ++i) {
    if (banks[i].source_tap != taps[i].name) {
      throw ConfigError("adapter bank " + std::to_string(i) + " is for '" + banks[i].source_tap + "', network tap is '" +
                        taps[i].name + "'");
    }
    if (banks[i].in_channels != 0 && banks[i].in_channels != taps[i].channels) {
      throw ConfigError("bank '" + banks[i].source_tap + "' expects " + std::to_string(banks[i].in_channels) +
                        " channels, tap provides " + std::to_string(taps[i].channels));
    }
  }
}

std::vector<AdapterBank> load_adapter(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open adapter " + manifest_path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed adapter manifest " + manifest_path.string() + ": " + e.what());
  }

  std::vector<AdapterBank> banks;
  std::size_t needed = 0;
  try {
    for (const auto& jb : j.at("banks")) {
      AdapterBank bank;
      bank.source_tap = jb.at("source_tap").get<std::string>();
      bank.mode = parse_mode(jb.at("mode").get<std::string>());
      bank.in_channels = jb.value("in_channels", 0);
      if (bank.mode == AdapterMode::random) {
        bank.seed = jb.at("seed").get<std::uint64_t>();
        bank.selected = random_select_channels(bank.in_channels, 1.0 / kReductionRatio, bank.seed);
      } else if (bank.mode == AdapterMode::learned) {
        for (const auto& js : jb.at("scales")) {
          ScaleFilter s;
          s.kernel_size = js.at("kernel").get<int>();
          const int out = js.at("out").get<int>();
          s.conv = ConvWeights{out, bank.in_channels, s.kernel_size, s.kernel_size, {}, {}};
          needed += s.conv.weight_count() + static_cast<std::size_t>(out);
          bank.scales.push_back(std::move(s));
        }
      }
      banks.push_back(std::move(bank));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed adapter manifest " + manifest_path.string() + ": " + e.what());
  }

  // Shapes are checked before touching the blob so invariant violations are
  // reported as such rather than as size mismatches.
  for (auto& bank : banks) {
    if (bank.mode != AdapterMode::learned) {
      validate(bank);
      continue;
    }
    const int want = reduced_channels(bank.in_channels, bank.source_tap);
    int total = 0;
    for (const auto& s : bank.scales) {
      if (s.kernel_size < 1 || s.kernel_size % 2 == 0) {
        throw ConfigError("bank '" + bank.source_tap + "': kernel size " + std::to_string(s.kernel_size) +
                          " must be odd");
      }
      total += s.conv.out_channels;
    }
    if (total != want) {
      throw ConfigError("bank '" + bank.source_tap + "': scale outputs sum to " + std::to_string(total) +
                        ", expected K/8 = " + std::to_string(want));
    }
  }
  if (needed == 0) return banks;

  if (!j.contains("blob")) throw DataError("adapter " + manifest_path.string() + " has learned banks but no blob");
  const auto blob_path = manifest_path.parent_path() / j.at("blob").get<std::string>();
  const RawBlob raw = read_blob_raw(blob_path);
  std::size_t cursor = 0;
  for (auto& bank : banks) {
    for (auto& s : bank.scales) {
      const std::size_t n = s.conv.weight_count() + static_cast<std::size_t>(s.conv.out_channels);
      if (raw.values.size() - cursor < n) {
        throw DataError("bank '" + bank.source_tap + "' scale " + std::to_string(s.kernel_size) + ": blob has " +
                        std::to_string(raw.values.size() - cursor) + " floats left, needs " + std::to_string(n));
      }
      const float* p = raw.values.data() + cursor;
      s.conv.weights.assign(p, p + s.conv.weight_count());
      s.conv.bias.assign(p + s.conv.weight_count(), p + n);
      cursor += n;
    }
    validate(bank);
  }
  if (cursor != raw.values.size()) throw DataError("adapter blob holds extra floats beyond the last bank");
  if (!raw.has_trailer || raw.trailer_length != raw.values.size() * sizeof(float) ||
      crc32_of(raw.values) != raw.trailer_crc) {
    throw DataError("adapter blob checksum mismatch in " + blob_path.string());
  }
  if (j.contains("blob_sha_or_crc") && parse_crc(j.at("blob_sha_or_crc").get<std::string>()) != raw.trailer_crc) {
    throw DataError("adapter manifest checksum does not match blob " + blob_path.string());
  }
  return banks;
}

std::vector<AdapterBank> load_adapter(const std::filesystem::path& manifest_path, const std::vector<TapShape>& taps) {
  auto banks = load_adapter(manifest_path);
  check_against_taps(banks, taps);
  return banks;
}

void save_adapter(const std::filesystem::path& manifest_path, const std::filesystem::path& blob_path,
                  const std::vector<AdapterBank>& banks) {
  json jbanks = json::array();
  std::vector<float> payload;
  for (const auto& bank : banks) {
    validate(bank);
    json jb = {{"source_tap", bank.source_tap}, {"mode", to_string(bank.mode)}};
    if (bank.in_channels != 0) jb["in_channels"] = bank.in_channels;
    if (bank.mode == AdapterMode::random) jb["seed"] = bank.seed;
    if (bank.mode == AdapterMode::learned) {
      json scales = json::array();
      for (const auto& s : bank.scales) {
        scales.push_back({{"kernel", s.kernel_size}, {"out", s.conv.out_channels}});
        payload.insert(payload.end(), s.conv.weights.begin(), s.conv.weights.end());
        payload.insert(payload.end(), s.conv.bias.begin(), s.conv.bias.end());
      }
      jb["scales"] = scales;
    }
    jbanks.push_back(std::move(jb));
  }
  json manifest = {{"banks", jbanks}};
  if (!payload.empty()) {
    const std::uint32_t crc = write_blob(blob_path, payload);
    manifest["blob"] = blob_path.filename().string();
    manifest["blob_sha_or_crc"] = format_crc(crc);
  }
  std::ofstream out(manifest_path);
  if (!out) throw DataError("cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace msdat
