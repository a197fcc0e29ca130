#include "msdat/network.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "msdat/blob.hpp"
#include "msdat/error.hpp"

namespace msdat {

using nlohmann::json;

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& text) {
  if (text == "conv") return LayerKind::conv;
  if (text == "relu") return LayerKind::relu;
  if (text == "maxpool") return LayerKind::maxpool;
  throw DataError("unknown layer kind '" + text + "'");
}

const LayerSpec* NetworkSpec::find(const std::string& name) const {
  auto it = std::find_if(layers.begin(), layers.end(), [&](const LayerSpec& l) { return l.name == name; });
  return it == layers.end() ? nullptr : &*it;
}

int NetworkSpec::input_channels() const {
  for (const auto& l : layers) {
    if (l.kind == LayerKind::conv) return l.in_channels;
  }
  return 0;
}

void validate(const NetworkSpec& net) {
  if (net.layers.empty()) throw ConfigError("network has no layers");
  if (net.layers.front().kind != LayerKind::conv) {
    throw ConfigError("network must start with a conv layer, got '" + net.layers.front().name + "'");
  }
  std::set<std::string> names;
  int channels = net.layers.front().in_channels;
  for (const auto& l : net.layers) {
    const std::string where = "layer '" + l.name + "'";
    if (l.name.empty()) throw ConfigError("layer with empty name");
    if (!names.insert(l.name).second) throw ConfigError("duplicate " + where);
    if (l.kernel_h < 1 || l.kernel_w < 1 || l.stride < 1 || l.pad < 0) {
      throw ConfigError(where + ": kernel and stride must be >= 1, pad >= 0");
    }
    switch (l.kind) {
      case LayerKind::conv:
        if (l.in_channels != channels) {
          throw ConfigError(where + ": expects " + std::to_string(l.in_channels) + " input channels, previous layer gives " +
                            std::to_string(channels));
        }
        if (l.out_channels < 1) throw ConfigError(where + ": out_channels must be >= 1");
        channels = l.out_channels;
        break;
      case LayerKind::relu:
      case LayerKind::maxpool:
        if ((l.in_channels != 0 && l.in_channels != channels) || (l.out_channels != 0 && l.out_channels != channels)) {
          throw ConfigError(where + ": channel count must pass through unchanged (" + std::to_string(channels) + ")");
        }
        break;
    }
  }
  if (channels < 1) throw ConfigError("network input channel count must be >= 1");
  for (const auto& tap : net.taps) {
    if (!names.count(tap)) throw ConfigError("tap '" + tap + "' names no layer");
  }
}

std::vector<TapShape> tap_shapes(const NetworkSpec& net, int in_h, int in_w) {
  validate(net);
  std::map<std::string, TapShape> shapes;
  int h = in_h, w = in_w, c = net.input_channels(), stride = 1;
  for (const auto& l : net.layers) {
    if (l.kind == LayerKind::conv) {
      h = (h + 2 * l.pad - l.kernel_h) / l.stride + 1;
      w = (w + 2 * l.pad - l.kernel_w) / l.stride + 1;
      c = l.out_channels;
      stride *= l.stride;
    } else if (l.kind == LayerKind::maxpool) {
      h = (h - l.kernel_h) / l.stride + 1;
      w = (w - l.kernel_w) / l.stride + 1;
      stride *= l.stride;
    }
    if (h < 1 || w < 1) throw ConfigError("input " + std::to_string(in_h) + "x" + std::to_string(in_w) +
                                          " too small for layer '" + l.name + "'");
    shapes[l.name] = TapShape{l.name, h, w, c, stride};
  }
  std::vector<TapShape> out;
  for (const auto& tap : net.taps) out.push_back(shapes.at(tap));
  return out;
}

namespace {

NetworkSpec parse_manifest(const json& j) {
  NetworkSpec net;
  try {
    for (const auto& jl : j.at("layers")) {
      LayerSpec l;
      l.name = jl.at("name").get<std::string>();
      l.kind = parse_layer_kind(jl.at("kind").get<std::string>());
      l.kernel_h = jl.value("kh", 1);
      l.kernel_w = jl.value("kw", 1);
      l.in_channels = jl.value("in", 0);
      l.out_channels = jl.value("out", 0);
      l.stride = jl.value("stride", 1);
      l.pad = jl.value("pad", 0);
      net.layers.push_back(std::move(l));
    }
    net.taps = j.at("taps").get<std::vector<std::string>>();
    const auto mean = j.at("input_mean").get<std::vector<float>>();
    if (mean.size() != 3) throw DataError("input_mean must hold 3 values");
    std::copy(mean.begin(), mean.end(), net.input_mean.begin());
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed network manifest: ") + e.what());
  }
  return net;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

LoadedNetwork load_network(const std::filesystem::path& manifest_path, const std::filesystem::path& blob_path) {
  const json manifest = read_json(manifest_path);
  LoadedNetwork loaded;
  loaded.spec = parse_manifest(manifest);
  validate(loaded.spec);

  const RawBlob raw = read_blob_raw(blob_path);
  std::size_t cursor = 0;
  for (const auto& l : loaded.spec.layers) {
    if (l.kind != LayerKind::conv) continue;
    ConvWeights conv{l.out_channels, l.in_channels, l.kernel_h, l.kernel_w, {}, {}};
    const std::size_t need = conv.weight_count() + static_cast<std::size_t>(l.out_channels);
    if (raw.values.size() - cursor < need) {
      throw DataError("layer '" + l.name + "': blob has " + std::to_string(raw.values.size() - cursor) +
                      " floats left, layer needs " + std::to_string(need));
    }
    const auto* p = raw.values.data() + cursor;
    conv.weights.assign(p, p + conv.weight_count());
    conv.bias.assign(p + conv.weight_count(), p + need);
    cursor += need;
    loaded.weights.blocks.emplace(l.name, std::move(conv));
  }
  if (cursor != raw.values.size()) {
    throw DataError("blob holds " + std::to_string(raw.values.size() - cursor) + " floats beyond the last layer");
  }
  if (!raw.has_trailer || raw.trailer_length != raw.values.size() * sizeof(float)) {
    throw DataError("blob trailer length does not match payload in " + blob_path.string());
  }
  const std::uint32_t crc = crc32_of(raw.values);
  if (crc != raw.trailer_crc) throw DataError("blob checksum mismatch in " + blob_path.string());
  if (manifest.contains("blob_sha_or_crc") &&
      parse_crc(manifest.at("blob_sha_or_crc").get<std::string>()) != crc) {
    throw DataError("manifest checksum does not match blob " + blob_path.string());
  }
  return loaded;
}

LoadedNetwork load_network(const std::filesystem::path& manifest_path) {
  const json manifest = read_json(manifest_path);
  if (!manifest.contains("blob")) throw DataError("manifest " + manifest_path.string() + " has no 'blob' field");
  return load_network(manifest_path, manifest_path.parent_path() / manifest.at("blob").get<std::string>());
}

void save_network(const std::filesystem::path& manifest_path, const std::filesystem::path& blob_path,
                  const NetworkSpec& net, const WeightStore& weights) {
  validate(net);
  std::vector<float> payload;
  json layers = json::array();
  for (const auto& l : net.layers) {
    layers.push_back({{"name", l.name}, {"kind", to_string(l.kind)}, {"kh", l.kernel_h}, {"kw", l.kernel_w},
                      {"in", l.in_channels}, {"out", l.out_channels}, {"stride", l.stride}, {"pad", l.pad}});
    if (l.kind != LayerKind::conv) continue;
    auto it = weights.blocks.find(l.name);
    if (it == weights.blocks.end()) throw ConfigError("no weights for layer '" + l.name + "'");
    const ConvWeights& w = it->second;
    if (w.out_channels != l.out_channels || w.in_channels != l.in_channels || w.kernel_h != l.kernel_h ||
        w.kernel_w != l.kernel_w || w.weights.size() != w.weight_count() ||
        w.bias.size() != static_cast<std::size_t>(w.out_channels)) {
      throw ConfigError("layer '" + l.name + "': weight block does not match its spec");
    }
    payload.insert(payload.end(), w.weights.begin(), w.weights.end());
    payload.insert(payload.end(), w.bias.begin(), w.bias.end());
  }
  const std::uint32_t crc = write_blob(blob_path, payload);
  json manifest = {{"layers", layers},
                   {"taps", net.taps},
                   {"input_mean", net.input_mean},
                   {"blob", blob_path.filename().string()},
                   {"blob_sha_or_crc", format_crc(crc)}};
  std::ofstream out(manifest_path);
  if (!out) throw DataError("cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';
}

std::map<std::string, Tensor> forward_extract(const NetworkSpec& net, const WeightStore& weights, const Tensor& input,
                                              const std::vector<std::string>& taps) {
  std::set<std::string> wanted(taps.begin(), taps.end());
  for (const auto& t : wanted) {
    if (!net.find(t)) throw ConfigError("tap '" + t + "' not found in network");
  }
  if (input.channels() != net.input_channels()) {
    throw ConfigError("network expects " + std::to_string(net.input_channels()) + " input channels, got " +
                      std::to_string(input.channels()));
  }
  std::map<std::string, Tensor> out;
  if (wanted.empty()) return out;
  Tensor current = input;
  for (const auto& l : net.layers) {
    switch (l.kind) {
      case LayerKind::conv: {
        auto it = weights.blocks.find(l.name);
        if (it == weights.blocks.end()) throw ConfigError("no weights for layer '" + l.name + "'");
        current = conv2d(current, it->second, l.stride, l.pad, l.name);
        break;
      }
      case LayerKind::relu:
        current = relu(current);
        break;
      case LayerKind::maxpool:
        if (l.kernel_h != l.kernel_w) throw ConfigError("layer '" + l.name + "': only square pooling is supported");
        current = max_pool2d(current, l.kernel_h, l.stride);
        break;
    }
    if (wanted.count(l.name)) {
      out.emplace(l.name, current);
      if (out.size() == wanted.size()) break;
    }
  }
  return out;
}

NetworkSpec vgg19_backbone(int width_divisor) {
  if (width_divisor < 1) throw ConfigError("width_divisor must be >= 1");
  NetworkSpec net;
  const int block_channels[5] = {64, 128, 256, 512, 512};
  const int block_convs[5] = {2, 2, 4, 4, 4};
  int channels = 3;
  for (int b = 0; b < 5; ++b) {
    const int out = std::max(1, block_channels[b] / width_divisor);
    for (int i = 1; i <= block_convs[b]; ++i) {
      const std::string suffix = std::to_string(b + 1) + "_" + std::to_string(i);
      net.layers.push_back({"conv" + suffix, LayerKind::conv, 3, 3, channels, out, 1, 1});
      net.layers.push_back({"relu" + suffix, LayerKind::relu, 1, 1, out, out, 1, 0});
      channels = out;
    }
    if (b < 4) {
      net.layers.push_back({"pool" + std::to_string(b + 1), LayerKind::maxpool, 2, 2, channels, channels, 2, 0});
    }
  }
  net.taps = {"relu3_4", "relu4_4", "relu5_4"};
  net.input_mean = {103.939f, 116.779f, 123.68f};
  return net;
}

LoadedNetwork raw_intensity_network(float scale, std::array<float, 3> mean) {
  LoadedNetwork n;
  n.spec.layers.push_back({"raw", LayerKind::conv, 1, 1, 3, 3, 1, 0});
  n.spec.taps = {"raw"};
  n.spec.input_mean = mean;
  ConvWeights w{3, 3, 1, 1, std::vector<float>(9, 0.0f), std::vector<float>(3, 0.0f)};
  for (int c = 0; c < 3; ++c) w.weights[c * 3 + c] = scale;
  n.weights.blocks.emplace("raw", std::move(w));
  return n;
}

}  // namespace msdat
