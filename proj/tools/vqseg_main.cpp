#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "vqseg/dataset.hpp"
#include "vqseg/errors.hpp"
#include "vqseg/io.hpp"
#include "vqseg/kernels.hpp"
#include "vqseg/metrics.hpp"
#include "vqseg/pipeline.hpp"
#include "vqseg/svg.hpp"
#include "vqseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace vqseg;

// Exit codes: 0 success, 2 usage error, 3 data/validation error,
// 4 internal numeric error.
namespace {

int cmd_synth(const fs::path& out, int classes, int sequences, uint64_t seed,
              int mean_segments, double noise, int64_t joints,
              int64_t joint_dim, uint32_t fps, int64_t patch, bool activities) {
  SynthConfig cfg;
  cfg.classes = classes;
  cfg.sequences = sequences;
  cfg.seed = seed;
  cfg.mean_segments = mean_segments;
  cfg.noise_sigma = noise;
  cfg.joint_count = joints;
  cfg.joint_dim = joint_dim;
  cfg.fps = fps;
  cfg.patch_size = patch;
  cfg.tag_activities = activities;
  synth_generate(cfg, out);
  std::cout << (out / "manifest.json").string() << "\n";
  return 0;
}

int cmd_train(const fs::path& config_path, const fs::path& data,
              const fs::path& out, fs::path log_path) {
  const TrainConfig cfg = parse_train_config(io::read_file(config_path));
  const DatasetManifest manifest = load_manifest(data);
  ModelState state =
      init_state(cfg, manifest.k_gt, manifest.joint_dim, manifest.joint_count);

  if (log_path.empty()) log_path = out.string() + ".log.csv";
  std::ofstream log(log_path);
  if (!log) throw ParseError("cannot open log for writing: " + log_path.string());

  const TrainOutcome outcome = train(state, manifest, &log);
  save_checkpoint(state, out);
  std::cout << "checkpoint: " << out.string() << "\n"
            << "log: " << log_path.string() << "\n"
            << "final " << loss_csv_row(outcome.steps, outcome.last) << "\n";
  return 0;
}

int cmd_segment(const fs::path& ckpt, const fs::path& data, const fs::path& out) {
  ModelState state = load_checkpoint(ckpt);
  const DatasetManifest manifest = load_manifest(data);
  if (manifest.joint_count != state.dims.joint_count ||
      manifest.joint_dim != state.dims.joint_dim)
    throw ValidationError(
        "checkpoint/config mismatch: checkpoint expects V=" +
        std::to_string(state.dims.joint_count) + ", C=" +
        std::to_string(state.dims.joint_dim) + " but manifest has V=" +
        std::to_string(manifest.joint_count) + ", C=" +
        std::to_string(manifest.joint_dim));
  fs::create_directories(out);
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    const SkeletonSequence seq = load_sequence(manifest, i);
    const std::vector<int> labels =
        predict_labels(state.params, state.dims, state.books, seq.joints);
    write_prediction_file(out, seq.id, labels);
  }
  std::cout << "predictions: " << out.string() << "\n";
  return 0;
}

std::map<std::string, std::vector<int>> load_predictions(
    const DatasetManifest& manifest, const fs::path& pred_dir) {
  std::map<std::string, std::vector<int>> predictions;
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    const ManifestItem& item = manifest.items[i];
    const std::string id = fs::path(item.seq_path).stem().string();
    // Unlabeled sequences cannot be scored; their predictions are optional.
    if (!item.labels_path && !fs::exists(pred_dir / (id + ".pred"))) continue;
    predictions[id] = read_prediction_file(pred_dir, id);
  }
  return predictions;
}

int cmd_eval(const fs::path& data, const fs::path& pred_dir, const fs::path& out) {
  const DatasetManifest manifest = load_manifest(data);
  const EvalReport report = evaluate(manifest, load_predictions(manifest, pred_dir));
  io::write_file(out, report_to_json(report));
  std::cout << "mof " << report.mof << " edit " << report.edit << " f1@10 "
            << report.f1_10 << " f1@25 " << report.f1_25 << " f1@50 "
            << report.f1_50 << " jsd " << report.jsd << "\n"
            << "report: " << out.string() << "\n";
  return 0;
}

int cmd_plot(const fs::path& data, const fs::path& pred_dir, const fs::path& out) {
  const DatasetManifest manifest = load_manifest(data);
  const auto predictions = load_predictions(manifest, pred_dir);
  const EvalReport report = evaluate(manifest, predictions);
  fs::create_directories(out);

  // Pooled dataset-level segment-length histograms (mapping-independent).
  SegmentList gt_pool, pred_pool;
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    const SkeletonSequence seq = load_sequence(manifest, i);
    if (!seq.labels) continue;
    const SegmentList gt = segments_from_labels(*seq.labels);
    const SegmentList pred = segments_from_labels(predictions.at(seq.id));
    for (const Segment& s : gt.segments) gt_pool.segments.push_back(s);
    for (const Segment& s : pred.segments) pred_pool.segments.push_back(s);
    gt_pool.total_frames += gt.total_frames;
    pred_pool.total_frames += pred.total_frames;

    // Per-sequence timeline with mapped class colors.
    std::vector<int> mapped(pred.total_frames);
    const std::vector<int>& raw = predictions.at(seq.id);
    for (std::size_t t = 0; t < raw.size(); ++t)
      mapped[t] = report.mapping.apply(raw[t]);
    io::write_file(out / (seq.id + ".timeline.svg"),
                   svg_timeline(seq.id, gt, segments_from_labels(mapped)));
  }
  const std::size_t bins = bins_needed(gt_pool, pred_pool);
  const std::vector<int64_t> gt_hist = length_histogram(gt_pool, bins);
  const std::vector<int64_t> pred_hist = length_histogram(pred_pool, bins);
  io::write_file(out / "lengths.svg",
                 svg_length_histogram("segment lengths", gt_hist, pred_hist,
                                      kJsdBinWidth));
  io::write_file(out / "lengths.csv",
                 histogram_csv(gt_hist, pred_hist, kJsdBinWidth));
  std::cout << "plots: " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skeleton action segmentation via hierarchical vector quantization"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  fs::path synth_out;
  int classes = 4, sequences = 20, mean_segments = 8;
  uint64_t seed = 1;
  double noise = 0.05;
  int64_t joints = 5, joint_dim = 3, patch = 10;
  uint32_t fps = 50;
  bool no_activities = false;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--classes", classes, "action classes K")
      ->check(CLI::Range(2, 1 << 20));
  synth->add_option("--sequences", sequences, "sequence count")
      ->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "rng seed");
  synth->add_option("--mean-segments", mean_segments, "segments per sequence")
      ->check(CLI::PositiveNumber);
  synth->add_option("--noise", noise, "gaussian noise sigma")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--joints", joints, "joint count V")->check(CLI::Range(2, 4096));
  synth->add_option("--joint-dim", joint_dim, "joint dimension C (2 or 3)");
  synth->add_option("--fps", fps, "frames per second");
  synth->add_option("--patch", patch, "patch size the lengths are scaled to")
      ->check(CLI::PositiveNumber);
  synth->add_flag("--no-activities", no_activities, "omit activity tags");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model");
  fs::path train_config, train_data, train_out, train_log;
  train_cmd->add_option("--config", train_config, "TrainConfig JSON")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--data", train_data, "dataset manifest")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "checkpoint path")->required();
  train_cmd->add_option("--log", train_log, "training log CSV path");

  // segment
  auto* seg = app.add_subcommand("segment", "predict frame labels");
  fs::path seg_ckpt, seg_data, seg_out;
  seg->add_option("--ckpt", seg_ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  seg->add_option("--data", seg_data, "dataset manifest")
      ->required()
      ->check(CLI::ExistingFile);
  seg->add_option("--out", seg_out, "prediction directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "score predictions against labels");
  fs::path eval_data, eval_pred, eval_out;
  ev->add_option("--data", eval_data, "dataset manifest")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--pred", eval_pred, "prediction directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  ev->add_option("--out", eval_out, "report JSON path")->required();

  // plot
  auto* plot = app.add_subcommand("plot", "emit SVG histograms and timelines");
  fs::path plot_data, plot_pred, plot_out;
  plot->add_option("--data", plot_data, "dataset manifest")
      ->required()
      ->check(CLI::ExistingFile);
  plot->add_option("--pred", plot_pred, "prediction directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  plot->add_option("--out", plot_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_out, classes, sequences, seed, mean_segments,
                       noise, joints, joint_dim, fps, patch, !no_activities);
    if (train_cmd->parsed())
      return cmd_train(train_config, train_data, train_out, train_log);
    if (seg->parsed()) return cmd_segment(seg_ckpt, seg_data, seg_out);
    if (ev->parsed()) return cmd_eval(eval_data, eval_pred, eval_out);
    if (plot->parsed()) return cmd_plot(plot_data, plot_pred, plot_out);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
