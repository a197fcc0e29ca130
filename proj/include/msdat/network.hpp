#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "msdat/ops.hpp"
#include "msdat/tensor.hpp"

namespace msdat {

enum class LayerKind { conv, relu, maxpool };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv;
  int kernel_h = 1;
  int kernel_w = 1;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  int pad = 0;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::vector<std::string> taps;
  /// Per-channel means subtracted from blue-green-red input pixels.
  std::array<float, 3> input_mean{0.0f, 0.0f, 0.0f};

  const LayerSpec* find(const std::string& name) const;
  /// Channel count of the network input (in_channels of the first conv).
  int input_channels() const;
};

/// Conv weights keyed by layer name; immutable once loaded.
struct WeightStore {
  std::map<std::string, ConvWeights> blocks;
};

/// Spatial size, channel count and cumulative stride (input px per cell)
/// of one tapped activation for a given input size.
struct TapShape {
  std::string name;
  int height = 0;
  int width = 0;
  int channels = 0;
  int stride = 1;
};

/// Checks names, kinds and the channel chain. Throws ConfigError.
void validate(const NetworkSpec& net);

/// Shapes of each tap in `net.taps` order for an input of in_h x in_w.
std::vector<TapShape> tap_shapes(const NetworkSpec& net, int in_h, int in_w);

struct LoadedNetwork {
  NetworkSpec spec;
  WeightStore weights;
};

/// Loads a JSON manifest and its weight blob. Every size is validated and
/// the blob checksum verified before returning. Throws DataError on file
/// problems and ConfigError on an inconsistent layer graph.
LoadedNetwork load_network(const std::filesystem::path& manifest_path, const std::filesystem::path& blob_path);

/// Loads a manifest whose "blob" field names the blob relative to it.
LoadedNetwork load_network(const std::filesystem::path& manifest_path);

/// Writes manifest and blob; the manifest records the blob file name and CRC.
void save_network(const std::filesystem::path& manifest_path, const std::filesystem::path& blob_path,
                  const NetworkSpec& net, const WeightStore& weights);

/// Runs one forward pass and returns the activations of the requested taps.
/// Stops after the deepest requested tap.
std::map<std::string, Tensor> forward_extract(const NetworkSpec& net, const WeightStore& weights,
                                              const Tensor& input, const std::vector<std::string>& taps);

/// Convolutional prefix of the 19-layer VGG network: 16 "same" 3x3 convs in
/// five blocks, each conv followed by relu and each of the first four blocks
/// by a 2x2 max pool. Taps are relu3_4, relu4_4, relu5_4. `width_divisor`
/// shrinks every channel count (1 gives the real 64..512 chain).
NetworkSpec vgg19_backbone(int width_divisor = 1);

/// One 1x1 conv layer mapping each color channel to itself times `scale`,
/// tapped directly. Stands in for the backbone when tracking on raw
/// intensities.
LoadedNetwork raw_intensity_network(float scale, std::array<float, 3> mean);

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& text);

}  // namespace msdat
