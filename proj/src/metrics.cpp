#include "vqseg/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "vqseg/errors.hpp"
#include "vqseg/io.hpp"

namespace vqseg {

SegmentList segments_from_labels(const std::vector<int>& labels) {
  SegmentList list;
  list.total_frames = static_cast<int64_t>(labels.size());
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (!list.segments.empty() && list.segments.back().label == labels[t]) {
      ++list.segments.back().length;
    } else {
      list.segments.push_back({labels[t], static_cast<int64_t>(t), 1});
    }
  }
  return list;
}

std::vector<int> labels_from_segments(const SegmentList& list) {
  std::vector<int> labels(static_cast<std::size_t>(list.total_frames), 0);
  for (const Segment& s : list.segments)
    for (int64_t t = s.start; t < s.start + s.length; ++t)
      labels[static_cast<std::size_t>(t)] = s.label;
  return labels;
}

int ClusterMapping::apply(int cluster) const {
  if (cluster >= 0 && cluster < static_cast<int>(to_class.size()) &&
      to_class[static_cast<std::size_t>(cluster)] != kUnmatched)
    return to_class[static_cast<std::size_t>(cluster)];
  // Distinct sentinel per cluster: unmatched segments never merge and never
  // equal a ground-truth class.
  return -1 - cluster;
}

ClusterMapping hungarian_match(const std::vector<std::vector<int64_t>>& confusion) {
  if (confusion.empty() || confusion[0].empty())
    throw ValidationError("hungarian_match: empty confusion matrix");
  const int rows = static_cast<int>(confusion.size());
  const int cols = static_cast<int>(confusion[0].size());
  for (const auto& row : confusion) {
    if (static_cast<int>(row.size()) != cols)
      throw ValidationError("hungarian_match: ragged confusion matrix");
    for (int64_t c : row)
      if (c < 0) throw ValidationError("hungarian_match: negative count");
  }

  // Square min-cost assignment on negated counts; dummy rows/columns carry
  // zero profit, which leaves the surplus side unmatched in effect.
  const int n = std::max(rows, cols);
  std::vector<std::vector<int64_t>> cost(
      static_cast<std::size_t>(n + 1),
      std::vector<int64_t>(static_cast<std::size_t>(n + 1), 0));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) cost[i + 1][j + 1] = -confusion[i][j];

  const int64_t inf = std::numeric_limits<int64_t>::max() / 4;
  std::vector<int64_t> u(static_cast<std::size_t>(n + 1), 0);
  std::vector<int64_t> v(static_cast<std::size_t>(n + 1), 0);
  std::vector<int> p(static_cast<std::size_t>(n + 1), 0);
  std::vector<int> way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<int64_t> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      int64_t delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const int64_t cur = cost[i0][j] - u[static_cast<std::size_t>(i0)] -
                            v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  ClusterMapping mapping;
  mapping.to_class.assign(static_cast<std::size_t>(rows),
                          ClusterMapping::kUnmatched);
  for (int j = 1; j <= n; ++j) {
    const int i = p[static_cast<std::size_t>(j)];
    if (i >= 1 && i <= rows && j <= cols) {
      mapping.to_class[static_cast<std::size_t>(i - 1)] = j - 1;
      mapping.matched_frames += confusion[i - 1][j - 1];
    }
  }
  return mapping;
}

double mof_percent(const std::vector<std::vector<int>>& gt,
                   const std::vector<std::vector<int>>& mapped_pred) {
  if (gt.size() != mapped_pred.size())
    throw ValidationError("mof: sequence count mismatch");
  int64_t correct = 0, total = 0;
  for (std::size_t s = 0; s < gt.size(); ++s) {
    if (gt[s].size() != mapped_pred[s].size())
      throw ValidationError("mof: length mismatch in sequence " + std::to_string(s));
    for (std::size_t t = 0; t < gt[s].size(); ++t) {
      correct += gt[s][t] == mapped_pred[s][t];
      ++total;
    }
  }
  if (total == 0) throw ValidationError("mof: no frames");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

double edit_score(const SegmentList& gt, const SegmentList& pred) {
  const auto& a = gt.segments;
  const auto& b = pred.segments;
  if (a.empty() || b.empty())
    throw ValidationError("edit_score: empty segment list");
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<int64_t>> d(n + 1, std::vector<int64_t>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int64_t>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int64_t>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const int64_t sub = d[i - 1][j - 1] + (a[i - 1].label != b[j - 1].label);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  const double dist = static_cast<double>(d[n][m]);
  return 100.0 * (1.0 - dist / static_cast<double>(std::max(n, m)));
}

namespace {

double segment_iou(const Segment& a, const Segment& b) {
  const int64_t lo = std::max(a.start, b.start);
  const int64_t hi = std::min(a.start + a.length, b.start + b.length);
  const int64_t inter = std::max<int64_t>(0, hi - lo);
  const int64_t uni = a.length + b.length - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

}  // namespace

void f1_accumulate(const SegmentList& gt, const SegmentList& pred, double tau,
                   F1Counts& counts) {
  counts.gt_segments += static_cast<int64_t>(gt.segments.size());
  std::vector<bool> used(gt.segments.size(), false);
  for (const Segment& p : pred.segments) {
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < gt.segments.size(); ++j) {
      if (gt.segments[j].label != p.label) continue;
      const double iou = segment_iou(p, gt.segments[j]);
      if (iou > best) {
        best = iou;
        best_j = j;
      }
    }
    if (best >= tau && !used[best_j]) {
      used[best_j] = true;
      ++counts.tp;
    } else {
      ++counts.fp;
    }
  }
}

double f1_from_counts(const F1Counts& c) {
  const int64_t predicted = c.tp + c.fp;
  if (predicted == 0 && c.gt_segments == 0) return 100.0;
  if (predicted == 0 || c.gt_segments == 0) return 0.0;
  const double precision = static_cast<double>(c.tp) / static_cast<double>(predicted);
  const double recall = static_cast<double>(c.tp) / static_cast<double>(c.gt_segments);
  if (precision + recall == 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

double f1_at(const SegmentList& gt, const SegmentList& pred, double tau) {
  F1Counts c;
  f1_accumulate(gt, pred, tau, c);
  return f1_from_counts(c);
}

double js_distance(std::vector<double> p, std::vector<double> q) {
  if (p.size() != q.size())
    throw ValidationError("js_distance: length mismatch");
  const double log2e = 1.4426950408889634073599246810019;
  double div = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) div += 0.5 * p[i] * std::log(p[i] / m) * log2e;
    if (q[i] > 0.0) div += 0.5 * q[i] * std::log(q[i] / m) * log2e;
  }
  div = std::max(0.0, div);
  return std::sqrt(div);
}

std::vector<int64_t> length_histogram(const SegmentList& list, std::size_t bins) {
  std::vector<int64_t> hist(bins, 0);
  for (const Segment& s : list.segments) {
    const std::size_t b = static_cast<std::size_t>(s.length / kJsdBinWidth);
    if (b >= bins)
      throw ValidationError("length_histogram: bin count too small");
    ++hist[b];
  }
  return hist;
}

std::size_t bins_needed(const SegmentList& a, const SegmentList& b) {
  int64_t longest = 0;
  for (const Segment& s : a.segments) longest = std::max(longest, s.length);
  for (const Segment& s : b.segments) longest = std::max(longest, s.length);
  return static_cast<std::size_t>(longest / kJsdBinWidth) + 1;
}

double jsd_video(const SegmentList& gt, const SegmentList& pred) {
  if (gt.segments.empty() || pred.segments.empty())
    throw ValidationError("jsd: video with zero segments");
  const std::size_t bins = bins_needed(gt, pred);
  const std::vector<int64_t> hg = length_histogram(gt, bins);
  const std::vector<int64_t> hp = length_histogram(pred, bins);
  std::vector<double> pg(bins), pp(bins);
  const double ng = static_cast<double>(gt.segments.size());
  const double np = static_cast<double>(pred.segments.size());
  for (std::size_t i = 0; i < bins; ++i) {
    pg[i] = static_cast<double>(hg[i]) / ng;
    pp[i] = static_cast<double>(hp[i]) / np;
  }
  return js_distance(pg, pp);
}

double jsd_bias(const std::vector<VideoSegments>& videos) {
  if (videos.empty()) throw ValidationError("jsd: no videos");
  struct Group {
    double distance_sum = 0;
    int64_t count = 0;
    int64_t frames = 0;
  };
  std::map<std::string, Group> groups;
  for (const VideoSegments& v : videos) {
    Group& g = groups[v.activity.value_or("")];
    g.distance_sum += jsd_video(v.gt, v.pred);
    g.count += 1;
    g.frames += v.gt.total_frames;
  }
  double weighted = 0.0;
  int64_t total_frames = 0;
  for (const auto& [name, g] : groups) {
    weighted += (g.distance_sum / static_cast<double>(g.count)) *
                static_cast<double>(g.frames);
    total_frames += g.frames;
  }
  return 100.0 * weighted / static_cast<double>(total_frames);
}

EvalReport evaluate(const DatasetManifest& manifest,
                    const std::map<std::string, std::vector<int>>& predictions) {
  struct Item {
    std::string id;
    std::vector<int> gt;
    std::vector<int> pred;
    std::optional<std::string> activity;
  };
  std::vector<Item> items;
  int max_cluster = -1;
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    SkeletonSequence seq = load_sequence(manifest, i);
    if (!seq.labels) continue;  // unlabeled sequences cannot be scored
    auto it = predictions.find(seq.id);
    if (it == predictions.end())
      throw ValidationError("evaluate: missing prediction for sequence '" +
                            seq.id + "'");
    if (it->second.size() != seq.labels->size())
      throw ValidationError("evaluate: prediction length mismatch for '" +
                            seq.id + "'");
    for (int c : it->second) {
      if (c < 0)
        throw ValidationError("evaluate: negative cluster id in '" + seq.id + "'");
      max_cluster = std::max(max_cluster, c);
    }
    items.push_back({seq.id, *seq.labels, it->second, seq.activity});
  }
  if (items.empty())
    throw ValidationError("evaluate: no labeled sequences in manifest");

  // Global confusion and Hungarian mapping.
  std::vector<std::vector<int64_t>> confusion(
      static_cast<std::size_t>(max_cluster + 1),
      std::vector<int64_t>(static_cast<std::size_t>(manifest.k_gt), 0));
  for (const Item& item : items)
    for (std::size_t t = 0; t < item.gt.size(); ++t)
      ++confusion[static_cast<std::size_t>(item.pred[t])]
                 [static_cast<std::size_t>(item.gt[t])];

  EvalReport report;
  report.mapping = hungarian_match(confusion);

  std::vector<std::vector<int>> gt_all, mapped_all;
  F1Counts c10, c25, c50;
  std::vector<VideoSegments> videos;
  double edit_sum = 0.0;
  for (const Item& item : items) {
    std::vector<int> mapped(item.pred.size());
    for (std::size_t t = 0; t < item.pred.size(); ++t)
      mapped[t] = report.mapping.apply(item.pred[t]);

    const SegmentList gt_segs = segments_from_labels(item.gt);
    const SegmentList pred_segs = segments_from_labels(mapped);

    SequenceScores scores;
    scores.id = item.id;
    scores.mof = mof_percent({item.gt}, {mapped});
    scores.edit = edit_score(gt_segs, pred_segs);
    scores.f1_10 = f1_at(gt_segs, pred_segs, 0.10);
    scores.f1_25 = f1_at(gt_segs, pred_segs, 0.25);
    scores.f1_50 = f1_at(gt_segs, pred_segs, 0.50);
    scores.jsd = 100.0 * jsd_video(gt_segs, pred_segs);
    report.per_sequence.push_back(scores);

    f1_accumulate(gt_segs, pred_segs, 0.10, c10);
    f1_accumulate(gt_segs, pred_segs, 0.25, c25);
    f1_accumulate(gt_segs, pred_segs, 0.50, c50);
    edit_sum += scores.edit;
    gt_all.push_back(item.gt);
    mapped_all.push_back(std::move(mapped));
    // Segment lengths are mapping-independent; use raw predictions for JSD.
    videos.push_back({gt_segs, segments_from_labels(item.pred), item.activity});
  }

  report.mof = mof_percent(gt_all, mapped_all);
  report.edit = edit_sum / static_cast<double>(items.size());
  report.f1_10 = f1_from_counts(c10);
  report.f1_25 = f1_from_counts(c25);
  report.f1_50 = f1_from_counts(c50);
  report.jsd = jsd_bias(videos);
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["mof"] = report.mof;
  j["edit"] = report.edit;
  j["f1_10"] = report.f1_10;
  j["f1_25"] = report.f1_25;
  j["f1_50"] = report.f1_50;
  j["jsd"] = report.jsd;
  nlohmann::json per = nlohmann::json::array();
  for (const SequenceScores& s : report.per_sequence) {
    per.push_back({{"id", s.id},
                   {"mof", s.mof},
                   {"edit", s.edit},
                   {"f1_10", s.f1_10},
                   {"f1_25", s.f1_25},
                   {"f1_50", s.f1_50},
                   {"jsd", s.jsd}});
  }
  j["per_sequence"] = std::move(per);
  return j.dump(2) + "\n";
}

void write_prediction_file(const std::filesystem::path& dir,
                           const std::string& id, const std::vector<int>& labels) {
  std::string text;
  for (int v : labels) {
    text += std::to_string(v);
    text += '\n';
  }
  io::write_file(dir / (id + ".pred"), text);
}

std::vector<int> read_prediction_file(const std::filesystem::path& dir,
                                      const std::string& id) {
  const auto path = dir / (id + ".pred");
  if (!std::filesystem::exists(path))
    throw ValidationError("missing prediction file for sequence '" + id + "'");
  return parse_labels(io::read_file(path), id + ".pred");
}

}  // namespace vqseg
