#include "vqseg/pipeline.hpp"

#include "vqseg/errors.hpp"

namespace vqseg {

Routing::Source parse_routing_source(const std::string& s) {
  if (s == "QZ") return Routing::Source::kQZ;
  if (s == "QA") return Routing::Source::kQA;
  if (s == "both") return Routing::Source::kBoth;
  throw ValidationError("routing source must be QZ, QA or both (got '" + s + "')");
}

std::string routing_source_name(Routing::Source s) {
  switch (s) {
    case Routing::Source::kQZ: return "QZ";
    case Routing::Source::kQA: return "QA";
    default: return "both";
  }
}

namespace {

ad::Var route(ad::Graph& g, const SeqForward& fwd, Routing::Source src) {
  switch (src) {
    case Routing::Source::kQZ:
      return fwd.ste.front();
    case Routing::Source::kQA:
      return fwd.ste.back();
    default: {
      // Mean of the two levels keeps the decoder input at prototype scale.
      ad::Var sum = g.add(fwd.ste.front(), fwd.ste.back());
      return g.scale(sum, 0.5);
    }
  }
}

}  // namespace

SeqForward forward_sequence(ad::Graph& g, const ModelVars& vars,
                            const ModelDims& dims,
                            const std::vector<Codebook>& books,
                            const Tensor& joints, const Routing& routing) {
  if (books.empty()) throw ValidationError("forward_sequence without codebooks");
  const int64_t t = joints.dim(1);

  SeqForward fwd;
  ad::Var xp = encode_seq(g, vars, dims, g.constant(joints));  // [T,V,D]
  fwd.maps = make_patch_maps(t, dims.joint_count, dims.latent(), dims.patch_size);
  fwd.patches = g.gather(xp, fwd.maps.to_patches,
                         {fwd.maps.m, dims.patch_feature_dim()});

  fwd.assignment = quantize_hierarchy(g.value(fwd.patches), books);
  fwd.ste.reserve(fwd.assignment.levels.size());
  for (const auto& level : fwd.assignment.levels)
    fwd.ste.push_back(g.straight_through(fwd.patches, level.quantized));

  fwd.shat = decode_spatial_seq(g, vars, dims, route(g, fwd, routing.spatial), t);
  fwd.that = decode_temporal_seq(g, vars, dims, route(g, fwd, routing.temporal));

  Timestamps ts = make_timestamps(t, dims.patch_size);
  fwd.timestamps = Tensor::zeros({1, fwd.maps.m});
  for (int64_t i = 0; i < fwd.maps.m; ++i)
    fwd.timestamps[i] = ts.values[static_cast<std::size_t>(i)];
  return fwd;
}

SeqLosses build_losses(ad::Graph& g, const SeqForward& fwd, const Tensor& joints,
                       const LossWeights& weights) {
  SeqLosses out;

  // First transition: raw patches against their finest-level prototypes.
  ad::Var commit_z = commitment_loss(g, fwd.patches,
                                     fwd.assignment.levels.front().quantized,
                                     fwd.maps.patch_mask);
  // Upper transitions: each level's straight-through rows against the next
  // level's prototypes. Zero when the hierarchy is flat.
  ad::Var commit_a = g.constant(Tensor::scalar(0.0));
  for (std::size_t l = 0; l + 1 < fwd.assignment.levels.size(); ++l) {
    ad::Var term = commitment_loss(g, fwd.ste[l],
                                   fwd.assignment.levels[l + 1].quantized,
                                   fwd.maps.patch_mask);
    commit_a = g.add(commit_a, term);
  }

  ad::Var spatial = spatial_recon_loss(g, fwd.shat, joints);
  ad::Var temporal = temporal_recon_loss(g, fwd.that, fwd.timestamps);

  out.total = total_loss(g, commit_z, commit_a, spatial, temporal, weights);
  out.report.commit_z = g.value(commit_z)[0];
  out.report.commit_a = g.value(commit_a)[0];
  out.report.spatial = g.value(spatial)[0];
  out.report.temporal = g.value(temporal)[0];
  out.report.total = g.value(out.total)[0];
  return out;
}

Tensor embed_patches(ModelParams& params, const ModelDims& dims,
                     const Tensor& joints) {
  ad::Graph g(false);
  ModelVars vars = bind_params(g, params);
  ad::Var xp = encode_seq(g, vars, dims, g.constant(joints));
  PatchMaps maps = make_patch_maps(joints.dim(1), dims.joint_count,
                                   dims.latent(), dims.patch_size);
  ad::Var patches =
      g.gather(xp, maps.to_patches, {maps.m, dims.patch_feature_dim()});
  return g.value(patches);
}

std::vector<int> patch_indices_to_frames(const std::vector<int32_t>& idx,
                                         int64_t patch_size, int64_t frames) {
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(frames));
  for (int64_t t = 0; t < frames; ++t) {
    const std::size_t m = static_cast<std::size_t>(t / patch_size);
    labels.push_back(idx.at(m));
  }
  return labels;
}

std::vector<int> predict_labels(ModelParams& params, const ModelDims& dims,
                                const std::vector<Codebook>& books,
                                const Tensor& joints) {
  const Tensor patches = embed_patches(params, dims, joints);
  Assignment a = quantize_hierarchy(patches, books);
  return patch_indices_to_frames(a.top().indices, dims.patch_size, joints.dim(1));
}

}  // namespace vqseg
