#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqseg/graph.hpp"
#include "vqseg/hvq.hpp"
#include "vqseg/rng.hpp"
#include "vqseg/tensor.hpp"

namespace vqseg {

struct EncoderConfig {
  int stages = 2;
  int layers_per_stage = 3;
  int hidden = 64;
  int latent = 32;  // D
  int kernel = 3;
  double dropout = 0.0;  // accepted for config compatibility; must stay 0

  void validate() const;
};

struct TemporalDecoderConfig {
  std::vector<int> hidden = {256, 64};

  void validate() const;
};

// Parameter containers, generic over payload so the same structure holds
// tensors (weights, Adam moments) and graph Vars.
template <typename T>
struct PointwiseP {
  T w;  // [co, ci]
  T b;  // [co]
};

template <typename T>
struct BlockP {
  T conv_w;  // [h, h, kernel], no bias
  PointwiseP<T> proj;
  int64_t dilation = 1;
};

template <typename T>
struct StageP {
  PointwiseP<T> in_proj;
  std::vector<BlockP<T>> blocks;
};

template <typename T>
struct TcnP {
  std::vector<StageP<T>> stages;
  PointwiseP<T> out_proj;
};

template <typename T>
struct MlpP {
  std::vector<PointwiseP<T>> layers;
};

template <typename T>
struct ModelP {
  TcnP<T> encoder;
  TcnP<T> spatial_decoder;
  MlpP<T> temporal_decoder;
};

using ModelParams = ModelP<Tensor>;
using ModelVars = ModelP<ad::Var>;

// --- generic traversal (leaf order is the checkpoint schema) ------------

template <typename A, typename B, typename F>
void zip_params(PointwiseP<A>& a, PointwiseP<B>& b, F&& f) {
  f(a.w, b.w);
  f(a.b, b.b);
}

template <typename A, typename B, typename F>
void zip_params(BlockP<A>& a, BlockP<B>& b, F&& f) {
  f(a.conv_w, b.conv_w);
  zip_params(a.proj, b.proj, f);
}

template <typename A, typename B, typename F>
void zip_params(StageP<A>& a, StageP<B>& b, F&& f) {
  zip_params(a.in_proj, b.in_proj, f);
  for (std::size_t i = 0; i < a.blocks.size(); ++i)
    zip_params(a.blocks[i], b.blocks[i], f);
}

template <typename A, typename B, typename F>
void zip_params(TcnP<A>& a, TcnP<B>& b, F&& f) {
  for (std::size_t i = 0; i < a.stages.size(); ++i)
    zip_params(a.stages[i], b.stages[i], f);
  zip_params(a.out_proj, b.out_proj, f);
}

template <typename A, typename B, typename F>
void zip_params(MlpP<A>& a, MlpP<B>& b, F&& f) {
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    zip_params(a.layers[i], b.layers[i], f);
}

template <typename A, typename B, typename F>
void zip_params(ModelP<A>& a, ModelP<B>& b, F&& f) {
  zip_params(a.encoder, b.encoder, f);
  zip_params(a.spatial_decoder, b.spatial_decoder, f);
  zip_params(a.temporal_decoder, b.temporal_decoder, f);
}

template <typename C, typename F>
void for_each_param(C& container, F&& f) {
  zip_params(container, container, [&](auto& x, auto&) { f(x); });
}

// Structure-preserving transform, e.g. tensors -> zero moments or Vars.
template <typename B, typename A, typename F>
ModelP<B> map_params(const ModelP<A>& src, F&& f) {
  ModelP<B> out;
  auto map_pw = [&](const PointwiseP<A>& p) {
    return PointwiseP<B>{f(p.w), f(p.b)};
  };
  auto map_tcn = [&](const TcnP<A>& t) {
    TcnP<B> o;
    for (const auto& st : t.stages) {
      StageP<B> so;
      so.in_proj = map_pw(st.in_proj);
      for (const auto& bl : st.blocks)
        so.blocks.push_back(BlockP<B>{f(bl.conv_w), map_pw(bl.proj), bl.dilation});
      o.stages.push_back(std::move(so));
    }
    o.out_proj = map_pw(t.out_proj);
    return o;
  };
  out.encoder = map_tcn(src.encoder);
  out.spatial_decoder = map_tcn(src.spatial_decoder);
  for (const auto& l : src.temporal_decoder.layers)
    out.temporal_decoder.layers.push_back(map_pw(l));
  return out;
}

// --- model construction and application ---------------------------------

struct ModelDims {
  int64_t joint_dim = 3;    // C
  int64_t joint_count = 0;  // V
  int64_t patch_size = 0;   // P
  EncoderConfig encoder;
  TemporalDecoderConfig temporal;

  int64_t latent() const { return encoder.latent; }
  int64_t patch_feature_dim() const {
    return patch_size * joint_count * encoder.latent;
  }
};

ModelParams init_model(const ModelDims& dims, Rng& rng);
ModelVars bind_params(ad::Graph& g, ModelParams& params);
int64_t count_scalars(ModelParams& params);

// Shared-weight multi-stage TCN on one stream: in_proj per stage, dilated
// residual blocks, final projection. x: [ci, T] -> [co, T].
ad::Var tcn_apply(ad::Graph& g, const TcnP<ad::Var>& p, ad::Var x);
ad::Var mlp_apply(ad::Graph& g, const MlpP<ad::Var>& p, ad::Var x);

// Per-joint encoding of a batch: [N,C,T,V] -> [N,T,V,D], one weight set.
Tensor encode(const Tensor& batch, ModelParams& params, const ModelDims& dims);
// Graph-recorded single-sequence encode: joints [C,T,V] -> X' [T,V,D].
ad::Var encode_seq(ad::Graph& g, const ModelVars& vars, const ModelDims& dims,
                   ad::Var joints);
// Mirrored TCN decode of patch-shaped features back to a skeleton.
// patch_rows: [M, P*V*D] -> Shat [C,T,V] (only real frames, pads dropped).
ad::Var decode_spatial_seq(ad::Graph& g, const ModelVars& vars,
                           const ModelDims& dims, ad::Var patch_rows, int64_t t);
// Patch MLP: [M, P*V*D] -> predicted timestamps [1, M].
ad::Var decode_temporal_seq(ad::Graph& g, const ModelVars& vars,
                            const ModelDims& dims, ad::Var patch_rows);

// --- patchification ------------------------------------------------------

// Non-overlapping temporal patches of an embedded batch [N,T,V,D]; the final
// partial patch is padded by replicating the last frame, and the pad mask
// marks exactly the replicated frame positions.
struct PatchGrid {
  Tensor patches;  // [N, M, P, V, D]
  Tensor mask;     // same shape, 1 = real frame, 0 = replicated pad
  int64_t n = 0, m = 0, p = 0, v = 0, d = 0;
  int64_t source_frames = 0;  // T of every sequence in the batch
};

PatchGrid patchify(const Tensor& x, int64_t patch_size);
Tensor depatchify(const PatchGrid& grid);

// Index maps for the graph-side patch plumbing on one sequence.
struct PatchMaps {
  int64_t m = 0;
  ad::IndexMap to_patches;    // [M*P*V*D] <- [T,V,D] flat, with replication
  ad::IndexMap to_frames;     // [T,V,D] flat <- patch rows
  std::shared_ptr<const Tensor> patch_mask;  // [M, P*V*D]
};
PatchMaps make_patch_maps(int64_t t, int64_t v, int64_t d, int64_t p);

}  // namespace vqseg
