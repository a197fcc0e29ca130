#include "msdat/tracker.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "msdat/error.hpp"
#include "msdat/ops.hpp"

namespace msdat {

using nlohmann::json;

namespace {

KernelType parse_kernel(const std::string& s) {
  if (s == "gaussian") return KernelType::gaussian;
  if (s == "linear") return KernelType::linear;
  throw ConfigError("unknown kernel type '" + s + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void TrackerConfig::validate() const {
  kcf.validate();
  if (!(margin >= 0.0)) throw ConfigError("margin must be >= 0");
  if (input_side < 2) throw ConfigError("input_side must be >= 2");
  if (update_interval < 1) throw ConfigError("update_interval must be >= 1");
}

json TrackerConfig::to_json() const {
  return {{"rho", kcf.window_scale},
          {"margin", margin},
          {"input_side", input_side},
          {"fusion_weights", fusion_weights},
          {"update_interval", update_interval},
          {"adapter", adapter},
          {"kcf",
           {{"kernel", kcf.kernel == KernelType::gaussian ? "gaussian" : "linear"},
            {"kernel_sigma", kcf.kernel_sigma},
            {"lambda", kcf.lambda},
            {"eta", kcf.eta},
            {"output_sigma_factor", kcf.output_sigma_factor}}}};
}

TrackerConfig TrackerConfig::from_json(const json& j) {
  TrackerConfig c;
  try {
    c.kcf.window_scale = j.value("rho", c.kcf.window_scale);
    c.margin = j.value("margin", c.margin);
    c.input_side = j.value("input_side", c.input_side);
    c.fusion_weights = j.value("fusion_weights", c.fusion_weights);
    c.update_interval = j.value("update_interval", c.update_interval);
    c.adapter = j.value("adapter", c.adapter);
    if (j.contains("kcf")) {
      const json& k = j.at("kcf");
      if (k.contains("kernel")) c.kcf.kernel = parse_kernel(k.at("kernel").get<std::string>());
      c.kcf.kernel_sigma = k.value("kernel_sigma", c.kcf.kernel_sigma);
      c.kcf.lambda = k.value("lambda", c.kcf.lambda);
      c.kcf.eta = k.value("eta", c.kcf.eta);
      c.kcf.output_sigma_factor = k.value("output_sigma_factor", c.kcf.output_sigma_factor);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed tracker config: ") + e.what());
  }
  c.validate();
  return c;
}

TrackerConfig TrackerConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::vector<double> default_fusion_weights(std::size_t taps) {
  if (taps == 3) return {0.02, 0.5, 1.0};
  return std::vector<double>(taps, 1.0);
}

// ---------------------------------------------------------------------------
// Feature pipeline

FeaturePipeline::FeaturePipeline(LoadedNetwork network, std::vector<AdapterBank> banks, int input_side)
    : network_(std::move(network)), banks_(std::move(banks)), input_side_(input_side) {
  if (network_.spec.taps.empty()) throw ConfigError("network declares no taps");
  taps_ = tap_shapes(network_.spec, input_side_, input_side_);
  for (const auto& b : banks_) validate(b);
  check_against_taps(banks_, taps_);
}

std::shared_ptr<const FeaturePipeline> FeaturePipeline::create(LoadedNetwork network, const std::string& adapter,
                                                               int input_side) {
  const auto taps = tap_shapes(network.spec, input_side, input_side);
  std::vector<AdapterBank> banks;
  if (adapter == "identity") {
    for (const auto& t : taps) banks.push_back(make_identity_bank(t.name));
  } else if (adapter.rfind("random:", 0) == 0) {
    const std::string digits = adapter.substr(7);
    std::uint64_t seed = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty()) {
      throw ConfigError("bad adapter seed in '" + adapter + "'");
    }
    for (std::size_t i = 0; i < taps.size(); ++i) {
      banks.push_back(make_random_bank(taps[i].name, taps[i].channels, seed + i));
    }
  } else {
    banks = load_adapter(adapter, taps);
  }
  return std::make_shared<const FeaturePipeline>(std::move(network), std::move(banks), input_side);
}

std::vector<Tensor> FeaturePipeline::extract(const Tensor& network_input) const {
  auto maps = forward_extract(network_.spec, network_.weights, network_input, network_.spec.taps);
  std::vector<Tensor> out;
  out.reserve(taps_.size());
  for (std::size_t i = 0; i < taps_.size(); ++i) out.push_back(apply_adapter(maps.at(taps_[i].name), banks_[i]));
  return out;
}

// ---------------------------------------------------------------------------
// Cropping and caching

Tensor crop_patch(const Tensor& image, const WindowGeometry& window, int out_side, const std::array<float, 3>& mean) {
  if (image.channels() != 3) throw ConfigError("crop_patch: image must have 3 channels");
  if (out_side < 2) throw ConfigError("crop_patch: out_side must be >= 2");
  const double step_x = (window.side_w - 1.0) / (out_side - 1);
  const double step_y = (window.side_h - 1.0) / (out_side - 1);
  const double max_x = image.width() - 1;
  const double max_y = image.height() - 1;

  struct Sample {
    int lo;
    int hi;
    float frac;
  };
  auto sample = [](double pos, double max_pos) {
    pos = std::clamp(pos, 0.0, max_pos);
    const int lo = static_cast<int>(pos);
    const int hi = std::min(lo + 1, static_cast<int>(max_pos));
    return Sample{lo, hi, static_cast<float>(pos - lo)};
  };
  std::vector<Sample> xs(out_side), ys(out_side);
  for (int j = 0; j < out_side; ++j) {
    xs[j] = sample(window.left() + j * step_x, max_x);
    ys[j] = sample(window.top() + j * step_y, max_y);
  }

  Tensor out(out_side, out_side, 3);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < out_side; ++y) {
      const Sample& a = ys[y];
      for (int x = 0; x < out_side; ++x) {
        const Sample& b = xs[x];
        const float top = image.at(c, a.lo, b.lo) + b.frac * (image.at(c, a.lo, b.hi) - image.at(c, a.lo, b.lo));
        const float bot = image.at(c, a.hi, b.lo) + b.frac * (image.at(c, a.hi, b.hi) - image.at(c, a.hi, b.lo));
        out.at(c, y, x) = top + a.frac * (bot - top) - mean[c];
      }
    }
  }
  return out;
}

namespace {

Tensor crop_cells(const Tensor& map, int top, int left, int rows, int cols) {
  Tensor out(rows, cols, map.channels());
  for (int c = 0; c < map.channels(); ++c) {
    for (int y = 0; y < rows; ++y) {
      const auto src = map.plane(c).subspan(static_cast<std::size_t>(top + y) * map.width() + left, cols);
      std::copy(src.begin(), src.end(), out.plane(c).begin() + static_cast<std::ptrdiff_t>(y) * cols);
    }
  }
  return out;
}

void rebuild_cache(TrackState& state, const Tensor& image, const WindowGeometry& needed) {
  const FeaturePipeline& pipe = *state.pipeline;
  const double grow = 1.0 + state.config.margin;
  const WindowGeometry input{needed.center_x, needed.center_y, grow * needed.side_w, grow * needed.side_h};
  const int side = pipe.input_side();
  const Tensor patch = crop_patch(image, input, side, pipe.spec().input_mean);
  std::vector<Tensor> maps = pipe.extract(patch);
  ++state.forward_passes;

  // Network pixel j samples image coordinate left + j*r (pixel centres at
  // i + 0.5), so cell 0 of a stride-s map starts half a sample before the
  // window edge and cells are s*r pixels wide.
  const double rx = (input.side_w - 1.0) / (side - 1);
  const double ry = (input.side_h - 1.0) / (side - 1);
  FeatureCache& cache = state.cache;
  cache.entries.clear();
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const int stride = pipe.taps()[i].stride;
    cache.entries.push_back(CacheEntry{std::move(maps[i]), input.left() + 0.5 - rx / 2.0,
                                       input.top() + 0.5 - ry / 2.0, stride * rx, stride * ry});
  }
  cache.input_window = input;
  cache.frame = state.frames;
  cache.valid = true;
}

Tensor prepare(const Tensor& crop, const TrackState& state, std::size_t tap) {
  return apply_window(bilinear_resize(crop, state.grid_h, state.grid_w), state.models[tap].hann);
}

}  // namespace

FeatureCrops fetch_features(TrackState& state, const Tensor& image, const WindowGeometry& needed) {
  FeatureCrops out;
  out.cache_hit = state.cache.valid && state.cache.frame == state.frames && state.cache.input_window.contains(needed);
  if (!out.cache_hit) rebuild_cache(state, image, needed);

  for (std::size_t i = 0; i < state.cache.entries.size(); ++i) {
    const CacheEntry& e = state.cache.entries[i];
    const int rows = state.crop_rows[i];
    const int cols = state.crop_cols[i];
    const int top = std::clamp(crop_offset(needed.top(), e.origin_y, e.stride_y), 0, e.adapted.height() - rows);
    const int left = std::clamp(crop_offset(needed.left(), e.origin_x, e.stride_x), 0, e.adapted.width() - cols);
    out.crops.push_back(crop_cells(e.adapted, top, left, rows, cols));
    if (static_cast<int>(i) == state.grid_tap) {
      out.left = e.origin_x + left * e.stride_x;
      out.top = e.origin_y + top * e.stride_y;
      out.cell_w = e.stride_x;
      out.cell_h = e.stride_y;
    }
  }
  return out;
}

Tensor fuse_responses(const std::vector<Tensor>& maps, const std::vector<double>& weights) {
  if (maps.empty() || maps.size() != weights.size()) {
    throw ConfigError("fuse_responses: need one weight per map");
  }
  Tensor fused(maps.front().height(), maps.front().width(), 1);
  auto dst = fused.data();
  for (std::size_t m = 0; m < maps.size(); ++m) {
    if (!maps[m].same_shape(fused)) throw ConfigError("fuse_responses: response maps differ in shape");
    const auto src = maps[m].data();
    const auto w = static_cast<float>(weights[m]);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
  }
  return fused;
}

// ---------------------------------------------------------------------------
// Tracking

namespace {

void refit(TrackState& state, const FeatureCrops& crops, double eta, bool first) {
  const double ax = state.target.center_x() - crops.left;
  const double ay = state.target.center_y() - crops.top;
  for (std::size_t i = 0; i < crops.crops.size(); ++i) {
    if (first) {
      const Tensor resized = bilinear_resize(crops.crops[i], state.grid_h, state.grid_w);
      state.models.push_back(train_model(apply_window(resized, hann_window(state.grid_h, state.grid_w)),
                                         state.config.kcf));
    } else {
      update_model(state.models[i], prepare(crops.crops[i], state, i), eta, state.config.kcf);
    }
  }
  if (first || eta == 1.0) {
    state.anchor_x = ax;
    state.anchor_y = ay;
  } else {
    state.anchor_x = (1.0 - eta) * state.anchor_x + eta * ax;
    state.anchor_y = (1.0 - eta) * state.anchor_y + eta * ay;
  }
}

}  // namespace

TrackState init_tracker(const Tensor& image, const Rect& init_rect, const TrackerConfig& config,
                        std::shared_ptr<const FeaturePipeline> pipeline) {
  config.validate();
  if (!pipeline) throw ConfigError("init_tracker: no feature pipeline");
  if (image.channels() != 3) throw ConfigError("init_tracker: image must have 3 channels");

  // Clamp the box to the image.
  const double x0 = std::clamp(init_rect.x, 0.0, static_cast<double>(image.width()));
  const double y0 = std::clamp(init_rect.y, 0.0, static_cast<double>(image.height()));
  const double x1 = std::clamp(init_rect.x + init_rect.w, 0.0, static_cast<double>(image.width()));
  const double y1 = std::clamp(init_rect.y + init_rect.h, 0.0, static_cast<double>(image.height()));
  const Rect rect{x0, y0, x1 - x0, y1 - y0};
  if (rect.w < 4.0 || rect.h < 4.0) {
    throw ConfigError("init_tracker: degenerate initial box (" + std::to_string(rect.w) + " x " +
                      std::to_string(rect.h) + " px inside the image)");
  }

  TrackState state;
  state.pipeline = std::move(pipeline);
  state.config = config;
  state.target = rect;
  const auto& taps = state.pipeline->taps();
  state.fusion_weights = config.fusion_weights.empty() ? default_fusion_weights(taps.size()) : config.fusion_weights;
  if (state.fusion_weights.size() != taps.size()) {
    throw ConfigError("config has " + std::to_string(state.fusion_weights.size()) + " fusion weights for " +
                      std::to_string(taps.size()) + " taps");
  }

  const double grow = 1.0 + config.margin;
  int best_area = -1;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    state.crop_rows.push_back(std::max(1, round_half_away(taps[i].height / grow)));
    state.crop_cols.push_back(std::max(1, round_half_away(taps[i].width / grow)));
    const int area = state.crop_rows.back() * state.crop_cols.back();
    if (area > best_area) {
      best_area = area;
      state.grid_tap = static_cast<int>(i);
    }
  }
  state.grid_h = state.crop_rows[state.grid_tap];
  state.grid_w = state.crop_cols[state.grid_tap];
  if (state.grid_h < 3 || state.grid_w < 3) {
    throw ConfigError("response grid " + std::to_string(state.grid_h) + "x" + std::to_string(state.grid_w) +
                      " is too small; raise input_side");
  }

  state.frames = 1;
  const WindowPair windows = compute_windows(state.target, config.kcf.window_scale, config.margin);
  const FeatureCrops crops = fetch_features(state, image, windows.kcf);
  refit(state, crops, 1.0, true);
  return state;
}

Rect track_frame(TrackState& state, const Tensor& image) {
  if (state.models.empty()) throw ConfigError("track_frame: tracker not initialized");
  ++state.frames;
  const TrackerConfig& cfg = state.config;

  // Predict from the window around the previous centre.
  const WindowPair before = compute_windows(state.target, cfg.kcf.window_scale, cfg.margin);
  const FeatureCrops det = fetch_features(state, image, before.kcf);
  std::vector<Tensor> responses;
  responses.reserve(det.crops.size());
  for (std::size_t i = 0; i < det.crops.size(); ++i) {
    responses.push_back(detect(state.models[i], prepare(det.crops[i], state, i), cfg.kcf));
  }
  const Peak peak = find_peak(fuse_responses(responses, state.fusion_weights));

  double cx = state.target.center_x();
  double cy = state.target.center_y();
  if (!peak.flat) {
    cx = det.left + state.anchor_x + (peak.col - state.grid_w / 2) * det.cell_w;
    cy = det.top + state.anchor_y + (peak.row - state.grid_h / 2) * det.cell_h;
    cx = std::clamp(cx, 0.0, static_cast<double>(image.width()));
    cy = std::clamp(cy, 0.0, static_cast<double>(image.height()));
  }
  state.target = Rect::from_center(cx, cy, state.target.w, state.target.h);

  // Refit on the window around the new centre; reuses the maps above when
  // that window is still inside the input window.
  if ((state.frames - 1) % cfg.update_interval == 0) {
    const WindowPair after = compute_windows(state.target, cfg.kcf.window_scale, cfg.margin);
    const FeatureCrops upd = fetch_features(state, image, after.kcf);
    refit(state, upd, cfg.kcf.eta, false);
  }
  return state.target;
}

}  // namespace msdat
