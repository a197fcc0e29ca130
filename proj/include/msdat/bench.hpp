#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "msdat/geometry.hpp"
#include "msdat/tensor.hpp"
#include "msdat/tracker.hpp"

namespace msdat {

/// One benchmark video: ordered frame files and one box per frame.
struct SequenceMeta {
  std::string name;
  std::vector<std::filesystem::path> frames;
  std::vector<Rect> ground_truth;

  const Rect& init_rect() const { return ground_truth.front(); }
};

/// Parses a ground-truth file: one "x,y,w,h" box per line with comma, tab
/// or space separators and 1-based coordinates (converted to 0-based).
std::vector<Rect> load_ground_truth(const std::filesystem::path& path);

/// Reads `dir/img/` (zero-padded numbered frames, no gaps) and
/// `dir/groundtruth_rect.txt`. Throws DataError on any inconsistency.
SequenceMeta load_sequence(const std::filesystem::path& dir);

/// Every sequence directory below `dataset`, sorted by name.
std::vector<std::filesystem::path> list_sequences(const std::filesystem::path& dataset);

double center_error(const Rect& a, const Rect& b);
double iou(const Rect& a, const Rect& b);

inline constexpr int kPrecisionThresholds = 51;  // 0..50 px
inline constexpr int kSuccessThresholds = 21;    // 0, 0.05, ..., 1
inline constexpr int kDpThreshold = 20;

using PrecisionCurve = std::array<double, kPrecisionThresholds>;
using SuccessCurve = std::array<double, kSuccessThresholds>;

/// Fraction of frames (frame 0 excluded) with centre error <= t px.
PrecisionCurve precision_curve(const std::vector<Rect>& results, const std::vector<Rect>& gt);
/// Fraction of frames (frame 0 excluded) with overlap >= t/20.
SuccessCurve success_curve(const std::vector<Rect>& results, const std::vector<Rect>& gt);
double auc(const SuccessCurve& success);
double dp_at(const std::vector<Rect>& results, const std::vector<Rect>& gt, double threshold_px);

/// Output of one one-pass evaluation.
struct OpeRun {
  std::string name;
  std::vector<Rect> rects;
  /// Wall-clock over frames 1..N-1, tracking only and including decoding.
  double track_seconds = 0.0;
  double track_seconds_with_io = 0.0;
  long frames = 0;
  long forward_passes = 0;
  bool failed = false;
  std::string error;

  double fps() const;
  double fps_with_io() const;
};

/// Initializes on frame 0 from ground truth and tracks every later frame
/// once. An init failure is recorded in the result instead of thrown.
/// With `preload` all frames are decoded before the clock starts.
OpeRun run_ope(const TrackerConfig& config, std::shared_ptr<const FeaturePipeline> pipeline,
               const SequenceMeta& seq, bool preload = false);

/// In-memory variant used by synthetic experiments.
OpeRun run_ope(const TrackerConfig& config, std::shared_ptr<const FeaturePipeline> pipeline,
               const std::string& name, const std::vector<Tensor>& frames, const Rect& init_rect);

struct EvalCurves {
  std::string name;
  PrecisionCurve precision{};
  SuccessCurve success{};
  double dp20 = 0.0;
  double auc = 0.0;
  double fps = 0.0;
  double fps_with_io = 0.0;
  long frames = 0;
  long forward_passes = 0;
  bool failed = false;
  std::string error;

  double forward_ratio() const { return frames > 0 ? static_cast<double>(forward_passes) / frames : 0.0; }
};

EvalCurves evaluate(const OpeRun& run, const std::vector<Rect>& gt);

struct Report {
  std::vector<EvalCurves> sequences;
  /// Unweighted mean curves over non-failed sequences; fps and forward ratio
  /// pool frames and time over those sequences.
  EvalCurves aggregate;
};

Report make_report(std::vector<EvalCurves> sequences);

inline constexpr int kReportVersion = 1;

nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);
void write_report(const std::filesystem::path& path, const Report& report);
Report load_report(const std::filesystem::path& path);

/// Writes `<dir>/<name>_precision.csv` and `<dir>/<name>_success.csv`
/// (header "threshold,value") for every sequence and for "aggregate".
void emit_plot_data(const std::filesystem::path& dir, const Report& report);

/// Per-frame tracker output as written by the track command.
nlohmann::json results_to_json(const OpeRun& run);
OpeRun results_from_json(const nlohmann::json& j);

}  // namespace msdat
