#pragma once

#include <string>
#include <vector>

#include "vqseg/dataset.hpp"
#include "vqseg/hvq.hpp"
#include "vqseg/losses.hpp"
#include "vqseg/model.hpp"

namespace vqseg {

// Which quantization level feeds each decoder (ablation switches).
struct Routing {
  enum class Source { kQZ, kQA, kBoth };
  Source spatial = Source::kQA;
  Source temporal = Source::kQZ;
};

Routing::Source parse_routing_source(const std::string& s);
std::string routing_source_name(Routing::Source s);

// One recorded forward pass of a single sequence.
struct SeqForward {
  ad::Var patches;              // [M, F]
  PatchMaps maps;
  Assignment assignment;
  std::vector<ad::Var> ste;     // straight-through var per level
  ad::Var shat;                 // [C, T, V]
  ad::Var that;                 // [1, M]
  Tensor timestamps;            // [1, M]
};

SeqForward forward_sequence(ad::Graph& g, const ModelVars& vars,
                            const ModelDims& dims,
                            const std::vector<Codebook>& books,
                            const Tensor& joints, const Routing& routing);

struct SeqLosses {
  LossReport report;  // unweighted parts plus weighted total
  ad::Var total;
};

SeqLosses build_losses(ad::Graph& g, const SeqForward& fwd, const Tensor& joints,
                       const LossWeights& weights);

// Patch rows of one sequence without any decoder work (codebook init, EMA).
Tensor embed_patches(ModelParams& params, const ModelDims& dims,
                     const Tensor& joints);

// Frame labels from the top-level assignment; pad frames dropped.
std::vector<int> predict_labels(ModelParams& params, const ModelDims& dims,
                                const std::vector<Codebook>& books,
                                const Tensor& joints);

// Broadcast per-patch indices to frames (P each), truncated to T.
std::vector<int> patch_indices_to_frames(const std::vector<int32_t>& idx,
                                         int64_t patch_size, int64_t frames);

}  // namespace vqseg
