#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqseg/metrics.hpp"

namespace vqseg {

// Deterministic color per class id; negative (unmatched) ids render gray.
std::string class_color(int label);

// Side-by-side GT/predicted segment-length histogram as a standalone SVG.
std::string svg_length_histogram(const std::string& title,
                                 const std::vector<int64_t>& gt_counts,
                                 const std::vector<int64_t>& pred_counts,
                                 int64_t bin_width);

// Two horizontal bands (GT above, prediction below), one rect per segment,
// x and width proportional to frame extents at integer-pixel rounding.
std::string svg_timeline(const std::string& title, const SegmentList& gt,
                         const SegmentList& pred, int width_px = 800);

// "bin,lo,hi,gt_count,pred_count" rows matching svg_length_histogram input.
std::string histogram_csv(const std::vector<int64_t>& gt_counts,
                          const std::vector<int64_t>& pred_counts,
                          int64_t bin_width);

}  // namespace vqseg
