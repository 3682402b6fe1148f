#pragma once

#include <cstdint>
#include <vector>

#include "vqseg/io.hpp"
#include "vqseg/rng.hpp"
#include "vqseg/tensor.hpp"

namespace vqseg {

// One codebook level: patch-shaped prototypes with EMA usage state.
struct Codebook {
  Tensor prototypes;                // [size, dim]
  std::vector<double> ema_count;    // usage estimate N per prototype
  Tensor ema_sum;                   // [size, dim], numerator of the last update
  std::vector<int32_t> stale_batches;

  int64_t size() const { return prototypes.dim(0); }
  int64_t dim() const { return prototypes.dim(1); }
};

Codebook make_codebook(int64_t size, int64_t dim);

struct HvqConfig {
  int k = 0;               // number of actions (top-level codebook size)
  int alpha = 2;           // subaction ratio
  double beta = 0.5;       // EMA decay
  double nu_z = 3.0;       // usage threshold, non-top levels
  double nu_a = 1.0;       // usage threshold, top level
  int stale_patience = 5;  // consecutive below-threshold batches
  int levels = 2;          // 1 | 2 | 3

  void validate() const;
  // Sizes from finest to top: {K}, {aK, K}, or {a^2 K, aK, K}.
  std::vector<int64_t> level_sizes() const;
  double threshold_for_level(std::size_t level) const;
};

struct LevelAssignment {
  std::vector<int32_t> indices;  // prototype index per input row
  Tensor quantized;              // [rows, dim], bitwise codebook entries
};

// Hierarchy result, finest level first. With one level the top aliases it.
struct Assignment {
  std::vector<LevelAssignment> levels;
  const LevelAssignment& finest() const { return levels.front(); }
  const LevelAssignment& top() const { return levels.back(); }
};

// Nearest-prototype assignment of each input row; ties break to the lowest
// index. Level 2 passes level-1 quantized rows as inputs.
LevelAssignment quantize_against(const Tensor& inputs, const Codebook& cb);

// Chains quantize_against through all books (inputs -> level 1 -> ... -> top).
Assignment quantize_hierarchy(const Tensor& patches,
                              const std::vector<Codebook>& books);

// EMA re-estimation from this batch's assignments (one call per batch per
// level). inputs are raw patches at level 1 and the previous level's
// quantized rows above that.
void ema_update(Codebook& cb, const Tensor& inputs,
                const std::vector<int32_t>& assigned, double beta);

// Replaces prototypes whose usage stayed below `threshold` for
// `stale_patience` consecutive batches with a random row of batch_inputs.
// Returns the replaced prototype indices.
std::vector<int64_t> replace_dead(Codebook& cb, const Tensor& batch_inputs,
                                  double threshold, int stale_patience,
                                  Rng& rng);

// Prototypes sampled from the first batch without replacement; a too-small
// batch falls back to Gaussian(0, 0.02) initialization.
void init_codebook_from_batch(Codebook& cb, const Tensor& batch_inputs, Rng& rng);

std::vector<Codebook> make_hierarchy(const HvqConfig& cfg, int64_t patch_dim);

void serialize_codebook(io::ByteWriter& w, const Codebook& cb);
Codebook deserialize_codebook(io::ByteReader& r);

}  // namespace vqseg
