// msdat: track one sequence, benchmark a dataset, or score saved results.
//
// Exit codes: 0 success, 1 usage or invalid configuration, 2 data error,
// 3 runtime error.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "msdat/bench.hpp"
#include "msdat/error.hpp"
#include "msdat/network.hpp"
#include "msdat/tracker.hpp"

namespace fs = std::filesystem;
using namespace msdat;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

struct ModelOptions {
  std::string net;
  std::string adapter;
  std::string config;
};

void add_model_options(CLI::App* cmd, ModelOptions& o) {
  cmd->add_option("--net", o.net, "Backbone manifest (JSON); raw intensities when omitted")->check(CLI::ExistingFile);
  cmd->add_option("--adapter", o.adapter, "identity, random:SEED or adapter manifest; overrides the config");
  cmd->add_option("--config", o.config, "Tracker configuration (JSON)")->check(CLI::ExistingFile);
}

struct Model {
  TrackerConfig config;
  std::shared_ptr<const FeaturePipeline> pipeline;
};

Model build_model(const ModelOptions& o) {
  Model m;
  if (!o.config.empty()) m.config = TrackerConfig::load(o.config);
  if (!o.adapter.empty()) m.config.adapter = o.adapter;
  m.config.validate();
  LoadedNetwork net = o.net.empty() ? raw_intensity_network(1.0f / 255.0f, {128.0f, 128.0f, 128.0f})
                                    : load_network(o.net);
  m.pipeline = FeaturePipeline::create(std::move(net), m.config.adapter, m.config.input_side);
  return m;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw DataError("write failed for " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void print_summary(const EvalCurves& c) {
  if (c.failed) {
    std::printf("%-24s FAILED: %s\n", c.name.c_str(), c.error.c_str());
    return;
  }
  std::printf("%-24s DP@20 %6.2f%%  AUC %.3f  FPS %7.2f (%.2f with I/O)  forwards/frame %.2f\n", c.name.c_str(),
              100.0 * c.dp20, c.auc, c.fps, c.fps_with_io, c.forward_ratio());
}

int run_track(const std::string& seq_dir, const ModelOptions& mo, const std::string& out, bool preload) {
  const Model m = build_model(mo);
  const SequenceMeta seq = load_sequence(seq_dir);
  const OpeRun run = run_ope(m.config, m.pipeline, seq, preload);
  write_json(out, results_to_json(run));
  if (run.failed) {
    std::fprintf(stderr, "msdat: %s: tracker failed: %s\n", seq.name.c_str(), run.error.c_str());
    return kRuntime;
  }
  print_summary(evaluate(run, seq.ground_truth));
  return kOk;
}

int run_bench(const std::string& dataset, const ModelOptions& mo, const std::string& report_path,
              const std::string& plots, bool preload, int jobs) {
  const Model m = build_model(mo);
  const auto dirs = list_sequences(dataset);
  if (dirs.empty()) throw DataError("no sequences found under " + dataset);
  if (jobs > 1) std::fprintf(stderr, "msdat: note: FPS figures are only comparable with --jobs 1\n");

  std::vector<EvalCurves> curves(dirs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < dirs.size(); i = next++) {
      try {
        const SequenceMeta seq = load_sequence(dirs[i]);
        curves[i] = evaluate(run_ope(m.config, m.pipeline, seq, preload), seq.ground_truth);
      } catch (const std::exception& e) {
        curves[i].name = dirs[i].filename().string();
        curves[i].failed = true;
        curves[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min<int>(jobs, static_cast<int>(dirs.size())); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const Report report = make_report(std::move(curves));
  write_report(report_path, report);
  if (!plots.empty()) emit_plot_data(plots, report);
  for (const auto& c : report.sequences) print_summary(c);
  print_summary(report.aggregate);
  return report.aggregate.failed ? kRuntime : kOk;
}

int run_eval(const std::string& results_path, const std::string& gt, const std::string& plots,
             const std::string& report_path) {
  const OpeRun run = results_from_json(read_json(results_path));
  const fs::path gt_file = fs::is_directory(gt) ? fs::path(gt) / "groundtruth_rect.txt" : fs::path(gt);
  const std::vector<Rect> truth = load_ground_truth(gt_file);
  if (!run.failed && run.rects.size() != truth.size()) {
    throw DataError(results_path + " has " + std::to_string(run.rects.size()) + " boxes but " + gt_file.string() +
                    " has " + std::to_string(truth.size()));
  }
  const Report report = make_report({evaluate(run, truth)});
  emit_plot_data(plots, report);
  if (!report_path.empty()) write_report(report_path, report);
  print_summary(report.sequences.front());
  return run.failed ? kRuntime : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MSDAT correlation-filter tracker"};
  app.require_subcommand(1);

  ModelOptions track_model, bench_model;
  std::string seq_dir, out, dataset, report, plots, results, gt, eval_report;
  bool track_preload = false, bench_preload = false;
  int jobs = 1;

  auto* track = app.add_subcommand("track", "Track one sequence and write per-frame boxes");
  track->add_option("--seq", seq_dir, "Sequence directory (img/ and groundtruth_rect.txt)")
      ->required()
      ->check(CLI::ExistingDirectory);
  add_model_options(track, track_model);
  track->add_option("--out", out, "Results file (JSON)")->required();
  track->add_flag("--preload", track_preload, "Decode all frames before timing");

  auto* bench = app.add_subcommand("bench", "One-pass evaluation over every sequence in a dataset");
  bench->add_option("--dataset", dataset, "Directory of sequence directories")
      ->required()
      ->check(CLI::ExistingDirectory);
  bench->add_option("--report", report, "Report file (JSON)")->required();
  add_model_options(bench, bench_model);
  bench->add_option("--plots", plots, "Also write precision/success CSV tables here");
  bench->add_flag("--preload", bench_preload, "Decode all frames of a sequence before timing");
  bench->add_option("--jobs", jobs, "Sequences evaluated in parallel")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Score a results file against ground truth");
  eval->add_option("--results", results, "Results file written by track")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt, "Sequence directory or ground-truth file")->required()->check(CLI::ExistingPath);
  eval->add_option("--plots", plots, "Directory for precision/success CSV tables")->required();
  eval->add_option("--report", eval_report, "Also write a report file (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*track) return run_track(seq_dir, track_model, out, track_preload);
    if (*bench) return run_bench(dataset, bench_model, report, plots, bench_preload, jobs);
    if (*eval) return run_eval(results, gt, plots, eval_report);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "msdat: invalid configuration: %s\n", e.what());
    return kUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "msdat: data error: %s\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "msdat: error: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
