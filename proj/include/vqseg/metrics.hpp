#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vqseg/dataset.hpp"

namespace vqseg {

struct Segment {
  int label = 0;
  int64_t start = 0;
  int64_t length = 0;
};

// Run-length encoding of a frame-label sequence: segments tile [0, T) with
// no gaps and adjacent segments carry different labels.
struct SegmentList {
  std::vector<Segment> segments;
  int64_t total_frames = 0;
};

SegmentList segments_from_labels(const std::vector<int>& labels);
std::vector<int> labels_from_segments(const SegmentList& list);

// Injective predicted-cluster -> ground-truth-class mapping, computed once
// over the whole dataset. Unmatched clusters keep a distinct negative
// sentinel so they never equal a ground-truth label and never merge.
struct ClusterMapping {
  static constexpr int kUnmatched = -1;
  std::vector<int> to_class;  // per predicted cluster id; kUnmatched if none
  int64_t matched_frames = 0;

  int apply(int cluster) const;
};

// Maximizes total matched frames; surplus rows/columns stay unmatched.
ClusterMapping hungarian_match(const std::vector<std::vector<int64_t>>& confusion);

// Percentage of frames whose mapped prediction equals ground truth.
double mof_percent(const std::vector<std::vector<int>>& gt,
                   const std::vector<std::vector<int>>& mapped_pred);

// 100 * (1 - levenshtein(gt segment labels, pred segment labels) / max len).
double edit_score(const SegmentList& gt, const SegmentList& pred);

struct F1Counts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t gt_segments = 0;
};

// Greedy one-to-one matching in temporal order: a predicted segment is a true
// positive when its best-IoU unused ground-truth segment of the same label
// reaches tau.
void f1_accumulate(const SegmentList& gt, const SegmentList& pred, double tau,
                   F1Counts& counts);
double f1_from_counts(const F1Counts& counts);
double f1_at(const SegmentList& gt, const SegmentList& pred, double tau);

// Jensen-Shannon distance (base-2 logs) between probability vectors.
double js_distance(std::vector<double> p, std::vector<double> q);

constexpr int64_t kJsdBinWidth = 20;

// Segment-length histogram over fixed-width bins; bin b covers
// [width*b, width*(b+1)).
std::vector<int64_t> length_histogram(const SegmentList& list, std::size_t bins);
std::size_t bins_needed(const SegmentList& a, const SegmentList& b);

struct VideoSegments {
  SegmentList gt;
  SegmentList pred;
  std::optional<std::string> activity;
};

// Per-video JS distance of segment-length histograms, averaged per activity
// group, then frame-weighted across groups; scaled to [0, 100].
double jsd_bias(const std::vector<VideoSegments>& videos);
double jsd_video(const SegmentList& gt, const SegmentList& pred);

struct SequenceScores {
  std::string id;
  double mof = 0;
  double edit = 0;
  double f1_10 = 0;
  double f1_25 = 0;
  double f1_50 = 0;
  double jsd = 0;
};

struct EvalReport {
  double mof = 0;
  double edit = 0;
  double f1_10 = 0;
  double f1_25 = 0;
  double f1_50 = 0;
  double jsd = 0;
  ClusterMapping mapping;
  std::vector<SequenceScores> per_sequence;
};

// One global Hungarian mapping over every labeled sequence, then all metrics.
// `predictions` maps sequence id -> per-frame cluster ids.
EvalReport evaluate(const DatasetManifest& manifest,
                    const std::map<std::string, std::vector<int>>& predictions);

std::string report_to_json(const EvalReport& report);

// Prediction files: one cluster id per line, one <id>.pred file per sequence.
void write_prediction_file(const std::filesystem::path& dir,
                           const std::string& id, const std::vector<int>& labels);
std::vector<int> read_prediction_file(const std::filesystem::path& dir,
                                      const std::string& id);

}  // namespace vqseg
