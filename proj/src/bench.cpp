#include "msdat/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "msdat/error.hpp"
#include "msdat/image_io.hpp"

namespace msdat {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Dataset ingestion

std::vector<Rect> load_ground_truth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground truth " + path.string());
  std::vector<Rect> rects;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace_if(line.begin(), line.end(), [](char c) { return c == ',' || c == '\t' || c == '\r'; }, ' ');
    if (line.find_first_not_of(' ') == std::string::npos) continue;
    std::istringstream fields(line);
    double v[4];
    std::string extra;
    if (!(fields >> v[0] >> v[1] >> v[2] >> v[3]) || (fields >> extra)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected four numbers x,y,w,h");
    }
    rects.push_back({v[0] - 1.0, v[1] - 1.0, v[2], v[3]});
  }
  return rects;
}

SequenceMeta load_sequence(const fs::path& dir) {
  SequenceMeta seq;
  seq.name = dir.filename().string();
  if (seq.name.empty()) seq.name = dir.parent_path().filename().string();
  const fs::path img = dir / "img";
  if (!fs::is_directory(img)) throw DataError("sequence " + dir.string() + " has no img/ directory");

  std::map<long, fs::path> numbered;
  int digits = 0;
  for (const auto& entry : fs::directory_iterator(img)) {
    if (!entry.is_regular_file()) continue;
    const std::string stem = entry.path().stem().string();
    long index = 0;
    auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), index);
    if (ec != std::errc() || ptr != stem.data() + stem.size()) continue;
    digits = std::max(digits, static_cast<int>(stem.size()));
    numbered.emplace(index, entry.path());
  }
  if (numbered.empty()) throw DataError("sequence " + dir.string() + " has no numbered frames in img/");
  long expect = numbered.begin()->first;
  for (const auto& [index, path] : numbered) {
    if (index != expect) {
      char name[32];
      std::snprintf(name, sizeof(name), "%0*ld", digits, expect);
      throw DataError("sequence " + dir.string() + ": missing frame " + name);
    }
    seq.frames.push_back(path);
    ++expect;
  }

  seq.ground_truth = load_ground_truth(dir / "groundtruth_rect.txt");
  if (seq.ground_truth.size() != seq.frames.size()) {
    throw DataError("sequence " + dir.string() + ": " + std::to_string(seq.frames.size()) + " frames but " +
                    std::to_string(seq.ground_truth.size()) + " ground-truth boxes");
  }
  if (seq.frames.size() < 2) throw DataError("sequence " + dir.string() + " needs at least 2 frames");
  return seq;
}

std::vector<fs::path> list_sequences(const fs::path& dataset) {
  if (!fs::is_directory(dataset)) throw DataError("dataset " + dataset.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dataset)) {
    if (entry.is_directory() && fs::exists(entry.path() / "groundtruth_rect.txt")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

double center_error(const Rect& a, const Rect& b) {
  return std::hypot(a.center_x() - b.center_x(), a.center_y() - b.center_y());
}

double iou(const Rect& a, const Rect& b) {
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

void check_lengths(const std::vector<Rect>& results, const std::vector<Rect>& gt) {
  if (results.size() != gt.size()) {
    throw DataError("result length " + std::to_string(results.size()) + " differs from ground truth length " +
                    std::to_string(gt.size()));
  }
  if (results.size() < 2) throw DataError("need at least 2 frames to evaluate");
}

}  // namespace

PrecisionCurve precision_curve(const std::vector<Rect>& results, const std::vector<Rect>& gt) {
  check_lengths(results, gt);
  PrecisionCurve curve{};
  const double n = static_cast<double>(results.size() - 1);
  for (std::size_t f = 1; f < results.size(); ++f) {
    const double err = center_error(results[f], gt[f]);
    for (int t = 0; t < kPrecisionThresholds; ++t) {
      if (err <= t) curve[t] += 1.0;
    }
  }
  for (double& v : curve) v /= n;
  return curve;
}

SuccessCurve success_curve(const std::vector<Rect>& results, const std::vector<Rect>& gt) {
  check_lengths(results, gt);
  SuccessCurve curve{};
  const double n = static_cast<double>(results.size() - 1);
  for (std::size_t f = 1; f < results.size(); ++f) {
    const double overlap = iou(results[f], gt[f]);
    for (int s = 0; s < kSuccessThresholds; ++s) {
      if (overlap >= s / 20.0) curve[s] += 1.0;
    }
  }
  for (double& v : curve) v /= n;
  return curve;
}

double auc(const SuccessCurve& success) {
  double sum = 0.0;
  for (double v : success) sum += v;
  return sum / kSuccessThresholds;
}

double dp_at(const std::vector<Rect>& results, const std::vector<Rect>& gt, double threshold_px) {
  check_lengths(results, gt);
  std::size_t hits = 0;
  for (std::size_t f = 1; f < results.size(); ++f) {
    if (center_error(results[f], gt[f]) <= threshold_px) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size() - 1);
}

// ---------------------------------------------------------------------------
// One-pass evaluation

double OpeRun::fps() const {
  return track_seconds > 0.0 ? static_cast<double>(rects.size() > 0 ? rects.size() - 1 : 0) / track_seconds : 0.0;
}

double OpeRun::fps_with_io() const {
  return track_seconds_with_io > 0.0 ? static_cast<double>(rects.size() > 0 ? rects.size() - 1 : 0) /
                                           track_seconds_with_io
                                     : 0.0;
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename FrameSource>
OpeRun run_frames(const TrackerConfig& config, std::shared_ptr<const FeaturePipeline> pipeline,
                  const std::string& name, std::size_t count, const Rect& init_rect, FrameSource&& frame_at) {
  OpeRun run;
  run.name = name;
  TrackState state;
  try {
    state = init_tracker(frame_at(0), init_rect, config, std::move(pipeline));
  } catch (const std::exception& e) {
    run.failed = true;
    run.error = e.what();
    return run;
  }
  run.rects.push_back(state.target);
  double decode = 0.0;
  double track = 0.0;
  for (std::size_t f = 1; f < count; ++f) {
    const auto t0 = Clock::now();
    const Tensor& image = frame_at(f);
    const auto t1 = Clock::now();
    run.rects.push_back(track_frame(state, image));
    const auto t2 = Clock::now();
    decode += std::chrono::duration<double>(t1 - t0).count();
    track += std::chrono::duration<double>(t2 - t1).count();
  }
  run.track_seconds = track;
  run.track_seconds_with_io = track + decode;
  run.frames = state.frames;
  run.forward_passes = state.forward_passes;
  return run;
}

}  // namespace

OpeRun run_ope(const TrackerConfig& config, std::shared_ptr<const FeaturePipeline> pipeline, const SequenceMeta& seq,
               bool preload) {
  if (preload) {
    std::vector<Tensor> frames;
    frames.reserve(seq.frames.size());
    for (const auto& p : seq.frames) frames.push_back(load_image(p));
    OpeRun run = run_ope(config, std::move(pipeline), seq.name, frames, seq.init_rect());
    return run;
  }
  Tensor current;
  return run_frames(config, std::move(pipeline), seq.name, seq.frames.size(), seq.init_rect(),
                    [&](std::size_t f) -> const Tensor& {
                      current = load_image(seq.frames[f]);
                      return current;
                    });
}

OpeRun run_ope(const TrackerConfig& config, std::shared_ptr<const FeaturePipeline> pipeline, const std::string& name,
               const std::vector<Tensor>& frames, const Rect& init_rect) {
  if (frames.empty()) throw DataError("run_ope: sequence '" + name + "' has no frames");
  return run_frames(config, std::move(pipeline), name, frames.size(), init_rect,
                    [&](std::size_t f) -> const Tensor& { return frames[f]; });
}

EvalCurves evaluate(const OpeRun& run, const std::vector<Rect>& gt) {
  EvalCurves c;
  c.name = run.name;
  c.frames = run.frames;
  c.forward_passes = run.forward_passes;
  if (run.failed) {
    c.failed = true;
    c.error = run.error;
    return c;
  }
  c.precision = precision_curve(run.rects, gt);
  c.success = success_curve(run.rects, gt);
  c.dp20 = c.precision[kDpThreshold];
  c.auc = auc(c.success);
  c.fps = run.fps();
  c.fps_with_io = run.fps_with_io();
  return c;
}

// ---------------------------------------------------------------------------
// Reports

Report make_report(std::vector<EvalCurves> sequences) {
  Report r;
  r.sequences = std::move(sequences);
  EvalCurves& agg = r.aggregate;
  agg.name = "aggregate";
  std::size_t used = 0;
  double frames_timed = 0.0, seconds = 0.0, seconds_io = 0.0;
  for (const auto& s : r.sequences) {
    if (s.failed) continue;
    ++used;
    for (int t = 0; t < kPrecisionThresholds; ++t) agg.precision[t] += s.precision[t];
    for (int t = 0; t < kSuccessThresholds; ++t) agg.success[t] += s.success[t];
    agg.frames += s.frames;
    agg.forward_passes += s.forward_passes;
    const double timed = static_cast<double>(s.frames - 1);
    frames_timed += timed;
    if (s.fps > 0.0) seconds += timed / s.fps;
    if (s.fps_with_io > 0.0) seconds_io += timed / s.fps_with_io;
  }
  if (used == 0) {
    agg.failed = true;
    agg.error = "no sequence evaluated successfully";
    return r;
  }
  for (double& v : agg.precision) v /= static_cast<double>(used);
  for (double& v : agg.success) v /= static_cast<double>(used);
  agg.dp20 = agg.precision[kDpThreshold];
  agg.auc = auc(agg.success);
  agg.fps = seconds > 0.0 ? frames_timed / seconds : 0.0;
  agg.fps_with_io = seconds_io > 0.0 ? frames_timed / seconds_io : 0.0;
  return r;
}

namespace {

json curves_to_json(const EvalCurves& c) {
  json j = {{"name", c.name},
            {"frames", c.frames},
            {"forward_passes", c.forward_passes},
            {"forward_ratio", c.forward_ratio()},
            {"failed", c.failed}};
  if (c.failed) {
    j["error"] = c.error;
    return j;
  }
  j["dp20"] = c.dp20;
  j["auc"] = c.auc;
  j["fps"] = c.fps;
  j["fps_with_io"] = c.fps_with_io;
  j["precision"] = c.precision;
  j["success"] = c.success;
  return j;
}

EvalCurves curves_from_json(const json& j) {
  EvalCurves c;
  c.name = j.at("name").get<std::string>();
  c.frames = j.at("frames").get<long>();
  c.forward_passes = j.at("forward_passes").get<long>();
  c.failed = j.at("failed").get<bool>();
  if (c.failed) {
    c.error = j.value("error", std::string());
    return c;
  }
  c.dp20 = j.at("dp20").get<double>();
  c.auc = j.at("auc").get<double>();
  c.fps = j.at("fps").get<double>();
  c.fps_with_io = j.at("fps_with_io").get<double>();
  c.precision = j.at("precision").get<PrecisionCurve>();
  c.success = j.at("success").get<SuccessCurve>();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

json report_to_json(const Report& report) {
  json seqs = json::array();
  for (const auto& s : report.sequences) seqs.push_back(curves_to_json(s));
  return {{"schema", "msdat-report"},
          {"version", kReportVersion},
          {"thresholds", {{"precision_px", "0..50"}, {"success_overlap", "0..1 step 0.05"}, {"dp_px", kDpThreshold}}},
          {"sequences", seqs},
          {"aggregate", curves_to_json(report.aggregate)}};
}

Report report_from_json(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != "msdat-report") throw DataError("not an msdat report");
    if (j.at("version").get<int>() != kReportVersion) {
      throw DataError("unsupported report version " + std::to_string(j.at("version").get<int>()));
    }
    Report r;
    for (const auto& js : j.at("sequences")) r.sequences.push_back(curves_from_json(js));
    r.aggregate = curves_from_json(j.at("aggregate"));
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

void write_report(const fs::path& path, const Report& report) { write_text(path, report_to_json(report).dump(2) + "\n"); }

Report load_report(const fs::path& path) { return report_from_json(read_json_file(path)); }

void emit_plot_data(const fs::path& dir, const Report& report) {
  fs::create_directories(dir);
  auto emit = [&](const EvalCurves& c) {
    if (c.failed) return;
    std::string p = "threshold,value\n";
    char line[64];
    for (int t = 0; t < kPrecisionThresholds; ++t) {
      std::snprintf(line, sizeof(line), "%d,%.10g\n", t, c.precision[t]);
      p += line;
    }
    std::string s = "threshold,value\n";
    for (int t = 0; t < kSuccessThresholds; ++t) {
      std::snprintf(line, sizeof(line), "%.2f,%.10g\n", t / 20.0, c.success[t]);
      s += line;
    }
    write_text(dir / (c.name + "_precision.csv"), p);
    write_text(dir / (c.name + "_success.csv"), s);
  };
  for (const auto& c : report.sequences) emit(c);
  emit(report.aggregate);
}

json results_to_json(const OpeRun& run) {
  json rects = json::array();
  for (const auto& r : run.rects) rects.push_back({r.x, r.y, r.w, r.h});
  json j = {{"schema", "msdat-results"},
            {"version", kReportVersion},
            {"sequence", run.name},
            {"rects", rects},
            {"frames", run.frames},
            {"forward_passes", run.forward_passes},
            {"track_seconds", run.track_seconds},
            {"track_seconds_with_io", run.track_seconds_with_io},
            {"failed", run.failed}};
  if (run.failed) j["error"] = run.error;
  return j;
}

OpeRun results_from_json(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != "msdat-results") throw DataError("not an msdat results file");
    OpeRun run;
    run.name = j.at("sequence").get<std::string>();
    for (const auto& r : j.at("rects")) {
      const auto v = r.get<std::vector<double>>();
      if (v.size() != 4) throw DataError("result box must have 4 numbers");
      run.rects.push_back({v[0], v[1], v[2], v[3]});
    }
    run.frames = j.at("frames").get<long>();
    run.forward_passes = j.at("forward_passes").get<long>();
    run.track_seconds = j.at("track_seconds").get<double>();
    run.track_seconds_with_io = j.at("track_seconds_with_io").get<double>();
    run.failed = j.at("failed").get<bool>();
    run.error = j.value("error", std::string());
    return run;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed results file: ") + e.what());
  }
}

}  // namespace msdat
