#include "vqseg/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "vqseg/errors.hpp"
#include "vqseg/io.hpp"
#include "vqseg/rng.hpp"

namespace vqseg {

namespace {

constexpr char kMagic[4] = {'S', 'K', 'L', '1'};

void validate_dims(int64_t c, int64_t t, int64_t v, const std::string& ctx) {
  if (t < 1) throw ValidationError(ctx + ": T must be >= 1 (got " + std::to_string(t) + ")");
  if (v < 2) throw ValidationError(ctx + ": V must be >= 2 (got " + std::to_string(v) + ")");
  if (c != 2 && c != 3 && c != 6)
    throw ValidationError(ctx + ": C must be one of {2,3,6} (got " + std::to_string(c) + ")");
}

}  // namespace

std::string encode_sequence(const SkeletonSequence& seq) {
  const int64_t c = seq.channels(), t = seq.frames(), v = seq.joint_count();
  io::ByteWriter w;
  w.bytes(kMagic, 4);
  w.u32(static_cast<uint32_t>(c));
  w.u32(static_cast<uint32_t>(t));
  w.u32(static_cast<uint32_t>(v));
  w.u32(seq.fps);
  const Tensor& j = seq.joints;
  for (int64_t i = 0; i < j.numel(); ++i) w.f32(static_cast<float>(j[i]));
  return w.take();
}

SkeletonSequence decode_sequence(const std::string& bytes, const std::string& id) {
  io::ByteReader r(bytes, "sequence " + id);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("sequence " + id + ": bad magic, expected SKL1");
  const int64_t c = r.u32();
  const int64_t t = r.u32();
  const int64_t v = r.u32();
  const uint32_t fps = r.u32();
  validate_dims(c, t, v, "sequence " + id);
  SkeletonSequence seq;
  seq.id = id;
  seq.fps = fps;
  seq.joints = Tensor::zeros({c, t, v});
  for (int64_t i = 0; i < seq.joints.numel(); ++i)
    seq.joints[i] = static_cast<double>(r.f32());
  if (!r.at_end())
    throw ParseError("sequence " + id + ": trailing bytes at offset " +
                     std::to_string(r.offset()));
  if (!seq.joints.all_finite())
    throw ValidationError("sequence " + id + ": non-finite coordinate");
  return seq;
}

void write_sequence(const std::filesystem::path& path, const SkeletonSequence& seq) {
  io::write_file(path, encode_sequence(seq));
}

SkeletonSequence load_sequence_file(const std::filesystem::path& path) {
  return decode_sequence(io::read_file(path), path.filename().string());
}

std::vector<int> parse_labels(const std::string& text, const std::string& context) {
  std::vector<int> labels;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() && is.eof()) break;
    std::size_t pos = 0;
    int value = 0;
    try {
      value = std::stoi(line, &pos);
    } catch (const std::exception&) {
      throw ParseError(context + ": line " + std::to_string(lineno) +
                       ": not an integer: '" + line + "'");
    }
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\r')) ++pos;
    if (pos != line.size())
      throw ParseError(context + ": line " + std::to_string(lineno) +
                       ": trailing characters: '" + line + "'");
    labels.push_back(value);
  }
  return labels;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    m.k_gt = j.at("k_gt").get<int>();
    m.fps = j.at("fps").get<uint32_t>();
    m.joint_count = j.at("v").get<int64_t>();
    m.joint_dim = j.at("c").get<int64_t>();
    for (const auto& it : j.at("items")) {
      ManifestItem item;
      item.seq_path = it.at("seq").get<std::string>();
      if (it.contains("labels") && !it.at("labels").is_null())
        item.labels_path = it.at("labels").get<std::string>();
      if (it.contains("activity") && !it.at("activity").is_null())
        item.activity = it.at("activity").get<std::string>();
      m.items.push_back(std::move(item));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
  if (m.k_gt < 1)
    throw ValidationError("manifest " + path.string() + ": k_gt must be >= 1");
  return m;
}

SkeletonSequence load_sequence(const DatasetManifest& manifest, std::size_t item) {
  if (item >= manifest.items.size())
    throw ValidationError("manifest item index out of range");
  const ManifestItem& entry = manifest.items[item];
  const auto seq_path = manifest.base_dir / entry.seq_path;
  SkeletonSequence seq = decode_sequence(io::read_file(seq_path), entry.seq_path);
  seq.id = std::filesystem::path(entry.seq_path).stem().string();
  seq.activity = entry.activity;
  if (seq.joint_count() != manifest.joint_count)
    throw ValidationError("sequence " + entry.seq_path + ": joint count " +
                          std::to_string(seq.joint_count()) +
                          " disagrees with manifest V=" +
                          std::to_string(manifest.joint_count));
  if (seq.channels() != manifest.joint_dim)
    throw ValidationError("sequence " + entry.seq_path + ": joint dim " +
                          std::to_string(seq.channels()) +
                          " disagrees with manifest C=" +
                          std::to_string(manifest.joint_dim));
  if (entry.labels_path) {
    const auto lab_path = manifest.base_dir / *entry.labels_path;
    std::vector<int> labels = parse_labels(io::read_file(lab_path), *entry.labels_path);
    if (static_cast<int64_t>(labels.size()) != seq.frames())
      throw ValidationError("labels " + *entry.labels_path +
                            ": label length mismatch (got " +
                            std::to_string(labels.size()) + ", sequence has " +
                            std::to_string(seq.frames()) + " frames)");
    for (int v : labels)
      if (v < 0 || v >= manifest.k_gt)
        throw ValidationError("labels " + *entry.labels_path +
                              ": label " + std::to_string(v) +
                              " outside [0, " + std::to_string(manifest.k_gt) + ")");
    seq.labels = std::move(labels);
  }
  return seq;
}

SkeletonSequence center_at_root(const SkeletonSequence& seq, int64_t root_joint) {
  const int64_t c = seq.channels(), t = seq.frames(), v = seq.joint_count();
  if (c != 2 && c != 3)
    throw ValidationError("center_at_root requires positional channels (C in {2,3})");
  if (root_joint < 0 || root_joint >= v)
    throw ValidationError("root joint index out of range");
  SkeletonSequence out = seq;
  Tensor& j = out.joints;
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t ti = 0; ti < t; ++ti) {
      const double root = j[(ci * t + ti) * v + root_joint];
      for (int64_t vi = 0; vi < v; ++vi) j[(ci * t + ti) * v + vi] -= root;
    }
  return out;
}

SkeletonSequence downsample(const SkeletonSequence& seq, uint32_t target_fps) {
  if (target_fps == 0 || seq.fps % target_fps != 0)
    throw ValidationError("target fps " + std::to_string(target_fps) +
                          " does not divide " + std::to_string(seq.fps));
  const int64_t stride = seq.fps / target_fps;
  if (stride == 1) return seq;
  const int64_t c = seq.channels(), t = seq.frames(), v = seq.joint_count();
  const int64_t t_out = (t + stride - 1) / stride;
  SkeletonSequence out;
  out.id = seq.id;
  out.fps = target_fps;
  out.activity = seq.activity;
  out.joints = Tensor::zeros({c, t_out, v});
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t ti = 0; ti < t_out; ++ti)
      for (int64_t vi = 0; vi < v; ++vi)
        out.joints[(ci * t_out + ti) * v + vi] =
            seq.joints[(ci * t + ti * stride) * v + vi];
  if (seq.labels) {
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(t_out));
    for (int64_t ti = 0; ti < t; ti += stride)
      labels.push_back((*seq.labels)[static_cast<std::size_t>(ti)]);
    out.labels = std::move(labels);
  }
  return out;
}

Timestamps make_timestamps(int64_t frames, int64_t patch_size) {
  if (patch_size < 1) throw ValidationError("patch size must be >= 1");
  const int64_t m = (frames + patch_size - 1) / patch_size;
  Timestamps ts;
  if (m <= 1) {
    ts.values = {0.0};
    return ts;
  }
  ts.values.resize(static_cast<std::size_t>(m));
  for (int64_t i = 0; i < m; ++i)
    ts.values[static_cast<std::size_t>(i)] =
        static_cast<double>(i) / static_cast<double>(m - 1);
  return ts;
}

namespace {

// Deterministic +/-1 pattern per (class, joint, channel), independent of the
// corpus seed so motif geometry is stable across corpora.
double sign_pattern(uint64_t a, uint64_t b, uint64_t c, uint64_t salt) {
  uint64_t z = a * 0x9e3779b97f4a7c15ULL + b * 0xbf58476d1ce4e5b9ULL +
               c * 0x94d049bb133111ebULL + salt;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return (z & 1) ? 1.0 : -1.0;
}

constexpr double kPoseScale = 0.6;
constexpr double kAmpScale = 0.25;
constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

double synth_motif_value(const SynthConfig& cfg, int cls, int64_t joint,
                         int64_t channel, int64_t t_local) {
  const uint64_t k = static_cast<uint64_t>(cls);
  const uint64_t v = static_cast<uint64_t>(joint);
  const uint64_t c = static_cast<uint64_t>(channel);
  const double offset = kPoseScale * sign_pattern(k, v, c, 0x0ddba11);
  const double amp = kAmpScale * sign_pattern(k, v, c, 0x5eed);
  // Class-specific rate, joint-specific phase; time is measured within the
  // segment so equal (class, t_local) frames coincide across sequences.
  const double freq = 0.5 + 0.35 * static_cast<double>(cls);
  const double phase =
      kTwoPi * 0.61803398875 * static_cast<double>(k * 31 + v);
  const double tsec = static_cast<double>(t_local) / static_cast<double>(cfg.fps);
  return offset + amp * std::sin(kTwoPi * freq * tsec + phase);
}

DatasetManifest synth_generate(const SynthConfig& cfg,
                               const std::filesystem::path& out_dir) {
  if (cfg.classes < 2) throw ValidationError("synth: classes must be >= 2");
  if (cfg.sequences < 1) throw ValidationError("synth: sequences must be >= 1");
  if (cfg.joint_count < 2) throw ValidationError("synth: joint_count must be >= 2");
  if (cfg.joint_dim != 2 && cfg.joint_dim != 3)
    throw ValidationError("synth: joint_dim must be 2 or 3");
  std::filesystem::create_directories(out_dir);

  Rng rng(cfg.seed);
  nlohmann::json items = nlohmann::json::array();

  // Every class appears at least once: seed round-robin, then random.
  int forced_class = 0;

  for (int s = 0; s < cfg.sequences; ++s) {
    const int64_t p = cfg.patch_size;
    const int min_segments = std::max(1, cfg.mean_segments - 2);
    const int max_segments = cfg.mean_segments + 2;
    const int n_segments =
        min_segments +
        static_cast<int>(rng.below(max_segments - min_segments + 1));

    std::vector<int> labels;
    std::vector<std::pair<int, int64_t>> segments;  // (class, length)
    int prev = -1;
    for (int g = 0; g < n_segments; ++g) {
      int cls;
      if (forced_class < cfg.classes) {
        cls = forced_class++;
        if (cls == prev) cls = (cls + 1) % cfg.classes;
      } else {
        do {
          cls = static_cast<int>(rng.below(cfg.classes));
        } while (cls == prev);
      }
      prev = cls;
      // Mostly uniform [2P, 8P]; occasionally exactly P to stress the
      // short-segment end of the length histogram.
      int64_t len;
      if (rng.uniform() < 0.15) {
        len = p;
      } else {
        len = 2 * p + rng.below(6 * p + 1);
      }
      segments.emplace_back(cls, len);
      for (int64_t i = 0; i < len; ++i) labels.push_back(cls);
    }

    const int64_t t = static_cast<int64_t>(labels.size());
    SkeletonSequence seq;
    seq.fps = cfg.fps;
    seq.joints = Tensor::zeros({cfg.joint_dim, t, cfg.joint_count});

    int64_t t0 = 0;
    for (const auto& [cls, len] : segments) {
      for (int64_t tl = 0; tl < len; ++tl)
        for (int64_t v = 0; v < cfg.joint_count; ++v)
          for (int64_t c = 0; c < cfg.joint_dim; ++c) {
            double val = synth_motif_value(cfg, cls, v, c, tl);
            if (cfg.noise_sigma > 0.0) val += rng.normal(0.0, cfg.noise_sigma);
            seq.joints[(c * t + (t0 + tl)) * cfg.joint_count + v] = val;
          }
      t0 += len;
    }

    char name[32];
    std::snprintf(name, sizeof(name), "seq_%03d", s);
    const std::string seq_file = std::string(name) + ".skl";
    const std::string lab_file = std::string(name) + ".labels";
    write_sequence(out_dir / seq_file, seq);

    std::string lab_text;
    for (int v : labels) {
      lab_text += std::to_string(v);
      lab_text += '\n';
    }
    io::write_file(out_dir / lab_file, lab_text);

    nlohmann::json item;
    item["seq"] = seq_file;
    item["labels"] = lab_file;
    if (cfg.tag_activities)
      item["activity"] = (s % 2 == 0) ? "groupA" : "groupB";
    else
      item["activity"] = nullptr;
    items.push_back(std::move(item));
  }

  nlohmann::json manifest;
  manifest["k_gt"] = cfg.classes;
  manifest["fps"] = cfg.fps;
  manifest["v"] = cfg.joint_count;
  manifest["c"] = cfg.joint_dim;
  manifest["items"] = std::move(items);
  io::write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  return load_manifest(out_dir / "manifest.json");
}

}  // namespace vqseg
