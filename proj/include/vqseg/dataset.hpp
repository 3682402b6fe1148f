#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vqseg/tensor.hpp"

namespace vqseg {

// One recording: per-frame joint coordinates (or inertial channels), with
// optional ground-truth frame labels and an activity tag.
struct SkeletonSequence {
  std::string id;
  Tensor joints;  // [C, T, V]
  uint32_t fps = 0;
  std::optional<std::vector<int>> labels;  // length T, values in [0, K_gt)
  std::optional<std::string> activity;

  int64_t channels() const { return joints.dim(0); }
  int64_t frames() const { return joints.dim(1); }
  int64_t joint_count() const { return joints.dim(2); }
};

struct ManifestItem {
  std::string seq_path;
  std::optional<std::string> labels_path;
  std::optional<std::string> activity;
};

struct DatasetManifest {
  int k_gt = 0;
  uint32_t fps = 0;
  int64_t joint_count = 0;  // V
  int64_t joint_dim = 0;    // C
  std::vector<ManifestItem> items;
  std::filesystem::path base_dir;  // directory of the manifest file
};

// Normalized per-patch time targets.
struct Timestamps {
  std::vector<double> values;  // length M, nondecreasing in [0, 1]
};

// --- file formats ------------------------------------------------------
// Sequence file (binary, little-endian): magic "SKL1", u32 C, u32 T, u32 V,
// u32 fps, then C*T*V 32-bit floats in (c,t,v) row-major order.
// Label file: one integer per line, T lines.
// Manifest: JSON {"k_gt","fps","v","c","items":[{"seq","labels","activity"}]}.

std::string encode_sequence(const SkeletonSequence& seq);
SkeletonSequence decode_sequence(const std::string& bytes, const std::string& id);

void write_sequence(const std::filesystem::path& path, const SkeletonSequence& seq);
SkeletonSequence load_sequence_file(const std::filesystem::path& path);

std::vector<int> parse_labels(const std::string& text, const std::string& context);

DatasetManifest load_manifest(const std::filesystem::path& path);
// Validated sequence with labels/activity attached per the manifest entry.
SkeletonSequence load_sequence(const DatasetManifest& manifest, std::size_t item);

// --- preprocessing -----------------------------------------------------

// Subtracts the root joint's coordinates from every joint, per frame.
// Positional data only (C in {2,3}).
SkeletonSequence center_at_root(const SkeletonSequence& seq, int64_t root_joint);

// Keeps every (fps/target_fps)-th frame starting at 0; labels follow.
SkeletonSequence downsample(const SkeletonSequence& seq, uint32_t target_fps);

// M = ceil(T/P); values[m] = m/(M-1), single patch -> [0].
Timestamps make_timestamps(int64_t frames, int64_t patch_size);

// --- synthetic corpus --------------------------------------------------

struct SynthConfig {
  int classes = 4;                // K, >= 2
  int sequences = 20;
  int mean_segments = 8;
  uint64_t seed = 1;
  double noise_sigma = 0.05;
  int64_t joint_count = 5;        // V
  int64_t joint_dim = 3;          // C
  uint32_t fps = 50;
  int64_t patch_size = 10;        // segment lengths drawn from [2P, 8P]
  bool tag_activities = true;     // alternate two activity groups
};

// Class-k frame motif (before noise): per-joint pose offset plus a
// class-specific oscillation over the frame index within the segment.
double synth_motif_value(const SynthConfig& cfg, int cls, int64_t joint,
                         int64_t channel, int64_t t_local);

// Writes sequence/label files plus manifest.json into out_dir and returns
// the loaded manifest. Byte-deterministic for a given config.
DatasetManifest synth_generate(const SynthConfig& cfg,
                               const std::filesystem::path& out_dir);

}  // namespace vqseg
