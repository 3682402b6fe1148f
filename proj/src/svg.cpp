#include "vqseg/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vqseg {

namespace {

constexpr const char* kPalette[] = {
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#1b9e77", "#d95f02",
};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string class_color(int label) {
  if (label < 0) return "#888888";
  return kPalette[static_cast<std::size_t>(label) %
                  (sizeof(kPalette) / sizeof(kPalette[0]))];
}

std::string svg_length_histogram(const std::string& title,
                                 const std::vector<int64_t>& gt_counts,
                                 const std::vector<int64_t>& pred_counts,
                                 int64_t bin_width) {
  const std::size_t bins = std::max(gt_counts.size(), pred_counts.size());
  int64_t peak = 1;
  for (int64_t c : gt_counts) peak = std::max(peak, c);
  for (int64_t c : pred_counts) peak = std::max(peak, c);

  const int plot_w = 760, plot_h = 300, left = 60, top = 40, bottom = 40;
  const int width = left + plot_w + 20;
  const int height = top + plot_h + bottom;
  const double group_w =
      static_cast<double>(plot_w) / static_cast<double>(std::max<std::size_t>(bins, 1));

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\">\n"
     << "<text x=\"" << left << "\" y=\"24\" font-size=\"16\">"
     << escape(title) << "</text>\n"
     << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\""
     << left + plot_w << "\" y2=\"" << top + plot_h
     << "\" stroke=\"#333\"/>\n";

  for (std::size_t b = 0; b < bins; ++b) {
    const int64_t g = b < gt_counts.size() ? gt_counts[b] : 0;
    const int64_t p = b < pred_counts.size() ? pred_counts[b] : 0;
    const double x0 = left + group_w * static_cast<double>(b);
    const double bar_w = group_w * 0.4;
    const double gh = plot_h * static_cast<double>(g) / static_cast<double>(peak);
    const double ph = plot_h * static_cast<double>(p) / static_cast<double>(peak);
    os << "<rect x=\"" << x0 + group_w * 0.07 << "\" y=\"" << top + plot_h - gh
       << "\" width=\"" << bar_w << "\" height=\"" << gh
       << "\" fill=\"#4e79a7\"/>\n";
    os << "<rect x=\"" << x0 + group_w * 0.53 << "\" y=\"" << top + plot_h - ph
       << "\" width=\"" << bar_w << "\" height=\"" << ph
       << "\" fill=\"#f28e2b\"/>\n";
    os << "<text x=\"" << x0 + group_w * 0.5 << "\" y=\"" << top + plot_h + 16
       << "\" font-size=\"10\" text-anchor=\"middle\">"
       << b * static_cast<std::size_t>(bin_width) << "</text>\n";
  }
  os << "<rect x=\"" << left << "\" y=\"" << height - 18
     << "\" width=\"12\" height=\"12\" fill=\"#4e79a7\"/>"
     << "<text x=\"" << left + 16 << "\" y=\"" << height - 8
     << "\" font-size=\"12\">ground truth</text>\n";
  os << "<rect x=\"" << left + 120 << "\" y=\"" << height - 18
     << "\" width=\"12\" height=\"12\" fill=\"#f28e2b\"/>"
     << "<text x=\"" << left + 136 << "\" y=\"" << height - 8
     << "\" font-size=\"12\">predicted</text>\n";
  os << "</svg>\n";
  return os.str();
}

namespace {

void timeline_band(std::ostringstream& os, const SegmentList& list, int y,
                   int band_h, int width_px) {
  const double scale =
      static_cast<double>(width_px) / static_cast<double>(list.total_frames);
  for (const Segment& s : list.segments) {
    const int x0 = static_cast<int>(std::lround(s.start * scale));
    const int x1 = static_cast<int>(std::lround((s.start + s.length) * scale));
    os << "<rect x=\"" << x0 << "\" y=\"" << y << "\" width=\"" << x1 - x0
       << "\" height=\"" << band_h << "\" fill=\"" << class_color(s.label)
       << "\"/>\n";
  }
}

}  // namespace

std::string svg_timeline(const std::string& title, const SegmentList& gt,
                         const SegmentList& pred, int width_px) {
  const int band_h = 36, gap = 14, top = 34, label_w = 44;
  const int height = top + 2 * band_h + gap + 24;
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
     << width_px + label_w + 10 << "\" height=\"" << height << "\">\n"
     << "<text x=\"0\" y=\"20\" font-size=\"14\">" << escape(title)
     << "</text>\n"
     << "<text x=\"0\" y=\"" << top + band_h / 2 + 4
     << "\" font-size=\"12\">GT</text>\n"
     << "<text x=\"0\" y=\"" << top + band_h + gap + band_h / 2 + 4
     << "\" font-size=\"12\">pred</text>\n"
     << "<g transform=\"translate(" << label_w << ",0)\">\n";
  timeline_band(os, gt, top, band_h, width_px);
  timeline_band(os, pred, top + band_h + gap, band_h, width_px);
  os << "</g>\n</svg>\n";
  return os.str();
}

std::string histogram_csv(const std::vector<int64_t>& gt_counts,
                          const std::vector<int64_t>& pred_counts,
                          int64_t bin_width) {
  const std::size_t bins = std::max(gt_counts.size(), pred_counts.size());
  std::ostringstream os;
  os << "bin,lo,hi,gt_count,pred_count\n";
  for (std::size_t b = 0; b < bins; ++b) {
    os << b << ',' << static_cast<int64_t>(b) * bin_width << ','
       << static_cast<int64_t>(b + 1) * bin_width << ','
       << (b < gt_counts.size() ? gt_counts[b] : 0) << ','
       << (b < pred_counts.size() ? pred_counts[b] : 0) << '\n';
  }
  return os.str();
}

}  // namespace vqseg
