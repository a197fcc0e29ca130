#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "msdat/adaptation.hpp"
#include "msdat/geometry.hpp"
#include "msdat/kcf.hpp"
#include "msdat/network.hpp"

namespace msdat {

struct TrackerConfig {
  KcfParams kcf;
  /// Input window is (1 + margin) times the KCF window on each axis.
  double margin = 0.10;
  /// Side of the square network input the input window is resized to.
  int input_side = 224;
  /// One weight per network tap, in tap order. Empty selects the defaults
  /// (0.02, 0.5, 1.0) for three taps, all ones otherwise.
  std::vector<double> fusion_weights;
  /// Train every this many frames.
  int update_interval = 1;
  /// "identity", "random:SEED" or a path to an adapter manifest.
  std::string adapter = "identity";

  void validate() const;
  nlohmann::json to_json() const;
  static TrackerConfig from_json(const nlohmann::json& j);
  static TrackerConfig load(const std::filesystem::path& path);
};

/// Backbone plus one adaptation bank per tap; immutable and shareable
/// between trackers on different threads.
class FeaturePipeline {
 public:
  FeaturePipeline(LoadedNetwork network, std::vector<AdapterBank> banks, int input_side);

  /// Resolves "identity" / "random:SEED" / manifest path against the taps.
  static std::shared_ptr<const FeaturePipeline> create(LoadedNetwork network, const std::string& adapter,
                                                       int input_side);

  const NetworkSpec& spec() const { return network_.spec; }
  const std::vector<AdapterBank>& banks() const { return banks_; }
  const std::vector<TapShape>& taps() const { return taps_; }
  int input_side() const { return input_side_; }

  /// Forward pass on a prepared network input followed by the adapters; one
  /// tensor per tap.
  std::vector<Tensor> extract(const Tensor& network_input) const;

 private:
  LoadedNetwork network_;
  std::vector<AdapterBank> banks_;
  std::vector<TapShape> taps_;
  int input_side_;
};

/// Crops `window` out of a blue-green-red image with replicate padding,
/// resamples it to out_side x out_side (sample j sits at image coordinate
/// left + j * (side - 1) / (out_side - 1)) and subtracts the channel means.
Tensor crop_patch(const Tensor& image, const WindowGeometry& window, int out_side, const std::array<float, 3>& mean);

struct CacheEntry {
  Tensor adapted;
  /// Image-space left/top boundary of cell (0, 0) and cell pitch in pixels.
  double origin_x = 0.0;
  double origin_y = 0.0;
  double stride_x = 1.0;
  double stride_y = 1.0;
};

/// Adapted feature maps of the most recent forward pass.
struct FeatureCache {
  bool valid = false;
  /// Frame the maps were computed from; maps never serve another frame.
  long frame = -1;
  WindowGeometry input_window;
  std::vector<CacheEntry> entries;
};

/// Per-tap crops covering one KCF window.
struct FeatureCrops {
  std::vector<Tensor> crops;
  bool cache_hit = false;
  /// Image-space left/top edge of the finest tap's crop and its cell pitch.
  double left = 0.0;
  double top = 0.0;
  double cell_w = 1.0;
  double cell_h = 1.0;
};

struct TrackState {
  std::shared_ptr<const FeaturePipeline> pipeline;
  TrackerConfig config;
  Rect target;
  std::vector<KcfModel> models;
  std::vector<double> fusion_weights;
  FeatureCache cache;
  /// Crop size in cells per tap, fixed at init.
  std::vector<int> crop_rows;
  std::vector<int> crop_cols;
  /// Tap whose crop defines the common response grid.
  int grid_tap = 0;
  int grid_h = 0;
  int grid_w = 0;
  /// Target centre relative to the top-left edge of the grid crop the
  /// filters were trained on, interpolated at the filters' rate. Detection
  /// adds it back so cell-quantized crops do not bias the estimate.
  double anchor_x = 0.0;
  double anchor_y = 0.0;
  long frames = 0;
  long forward_passes = 0;
};

/// Returns crops of the cached maps when the cache holds this frame and its
/// input window contains `needed`; otherwise runs one forward pass over the
/// input window around `needed`, refreshes the cache and crops from it.
FeatureCrops fetch_features(TrackState& state, const Tensor& image, const WindowGeometry& needed);

/// Elementwise weighted sum of equally shaped single-channel maps.
Tensor fuse_responses(const std::vector<Tensor>& maps, const std::vector<double>& weights);

TrackState init_tracker(const Tensor& image, const Rect& init_rect, const TrackerConfig& config,
                        std::shared_ptr<const FeaturePipeline> pipeline);

/// One frame: detect around the previous centre, fuse, move, refit. Target
/// size never changes.
Rect track_frame(TrackState& state, const Tensor& image);

/// Default fusion weights for `taps` taps.
std::vector<double> default_fusion_weights(std::size_t taps);

}  // namespace msdat
