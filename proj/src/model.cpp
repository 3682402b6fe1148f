#include "vqseg/model.hpp"

#include <cmath>
#include <memory>

#include "vqseg/errors.hpp"

namespace vqseg {

void EncoderConfig::validate() const {
  if (stages < 1) throw ValidationError("encoder: stages must be >= 1");
  if (layers_per_stage < 1)
    throw ValidationError("encoder: layers_per_stage must be >= 1");
  if (hidden < 1) throw ValidationError("encoder: hidden must be >= 1");
  if (latent < 1) throw ValidationError("encoder: latent must be >= 1");
  if (kernel < 1 || kernel % 2 == 0)
    throw ValidationError("encoder: kernel must be odd and >= 1");
  if (dropout != 0.0)
    throw ValidationError("encoder: only dropout 0 is supported");
}

void TemporalDecoderConfig::validate() const {
  if (hidden.empty())
    throw ValidationError("temporal decoder: needs at least one hidden layer");
  for (int h : hidden)
    if (h < 1) throw ValidationError("temporal decoder: hidden sizes must be >= 1");
}

namespace {

Tensor uniform_init(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

PointwiseP<Tensor> init_pointwise(int64_t co, int64_t ci, Rng& rng) {
  return {uniform_init({co, ci}, ci, rng), uniform_init({co}, ci, rng)};
}

TcnP<Tensor> init_tcn(int64_t in_ch, int64_t out_ch, const EncoderConfig& cfg,
                      bool reverse_dilations, Rng& rng) {
  TcnP<Tensor> tcn;
  const int64_t h = cfg.hidden;
  for (int s = 0; s < cfg.stages; ++s) {
    StageP<Tensor> stage;
    stage.in_proj = init_pointwise(h, s == 0 ? in_ch : h, rng);
    for (int l = 0; l < cfg.layers_per_stage; ++l) {
      const int exp = reverse_dilations ? cfg.layers_per_stage - 1 - l : l;
      BlockP<Tensor> block;
      block.dilation = int64_t{1} << exp;
      block.conv_w = uniform_init({h, h, cfg.kernel}, h * cfg.kernel, rng);
      block.proj = init_pointwise(h, h, rng);
      stage.blocks.push_back(std::move(block));
    }
    tcn.stages.push_back(std::move(stage));
  }
  tcn.out_proj = init_pointwise(out_ch, h, rng);
  return tcn;
}

}  // namespace

ModelParams init_model(const ModelDims& dims, Rng& rng) {
  dims.encoder.validate();
  dims.temporal.validate();
  if (dims.joint_count < 2) throw ValidationError("model: joint_count must be >= 2");
  if (dims.patch_size < 1) throw ValidationError("model: patch_size must be >= 1");

  ModelParams p;
  p.encoder = init_tcn(dims.joint_dim, dims.encoder.latent, dims.encoder,
                       /*reverse_dilations=*/false, rng);
  p.spatial_decoder = init_tcn(dims.encoder.latent, dims.joint_dim, dims.encoder,
                               /*reverse_dilations=*/true, rng);
  int64_t in = dims.patch_feature_dim();
  for (int h : dims.temporal.hidden) {
    p.temporal_decoder.layers.push_back(init_pointwise(h, in, rng));
    in = h;
  }
  p.temporal_decoder.layers.push_back(init_pointwise(1, in, rng));
  return p;
}

ModelVars bind_params(ad::Graph& g, ModelParams& params) {
  return map_params<ad::Var>(params, [&g](const Tensor& t) { return g.param(t); });
}

int64_t count_scalars(ModelParams& params) {
  int64_t n = 0;
  for_each_param(params, [&n](Tensor& t) { n += t.numel(); });
  return n;
}

ad::Var tcn_apply(ad::Graph& g, const TcnP<ad::Var>& p, ad::Var x) {
  ad::Var h = x;
  for (const auto& stage : p.stages) {
    h = g.pointwise(h, stage.in_proj.w, stage.in_proj.b);
    for (const auto& block : stage.blocks) {
      ad::Var r = g.conv1d_dilated(h, block.conv_w, block.dilation);
      r = g.pointwise(g.relu(r), block.proj.w, block.proj.b);
      h = g.add(h, r);
    }
  }
  return g.pointwise(h, p.out_proj.w, p.out_proj.b);
}

ad::Var mlp_apply(ad::Graph& g, const MlpP<ad::Var>& p, ad::Var x) {
  ad::Var h = x;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    h = g.pointwise(h, p.layers[i].w, p.layers[i].b);
    if (i + 1 < p.layers.size()) h = g.relu(h);
  }
  return h;
}

namespace {

// [C,T,V] flat -> per-joint [C,T] extraction map.
ad::IndexMap joint_extract_map(int64_t c, int64_t t, int64_t v, int64_t joint) {
  auto map = std::make_shared<std::vector<int64_t>>();
  map->reserve(static_cast<std::size_t>(c * t));
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t ti = 0; ti < t; ++ti)
      map->push_back((ci * t + ti) * v + joint);
  return map;
}

}  // namespace

ad::Var encode_seq(ad::Graph& g, const ModelVars& vars, const ModelDims& dims,
                   ad::Var joints) {
  const Tensor& jv = g.value(joints);
  if (jv.shape().size() != 3 || jv.dim(0) != dims.joint_dim ||
      jv.dim(2) != dims.joint_count)
    throw DimensionError("encode_seq expects joints [C,T,V] matching the model");
  const int64_t c = jv.dim(0), t = jv.dim(1), v = jv.dim(2);
  const int64_t d = dims.latent();

  std::vector<ad::Var> streams;
  streams.reserve(static_cast<std::size_t>(v));
  for (int64_t joint = 0; joint < v; ++joint) {
    ad::Var jx = g.gather(joints, joint_extract_map(c, t, v, joint), {c, t});
    streams.push_back(tcn_apply(g, vars.encoder, jx));  // [D, T]
  }
  ad::Var cat = g.concat(streams);  // [V * D * T]

  auto map = std::make_shared<std::vector<int64_t>>();
  map->reserve(static_cast<std::size_t>(t * v * d));
  for (int64_t ti = 0; ti < t; ++ti)
    for (int64_t vi = 0; vi < v; ++vi)
      for (int64_t di = 0; di < d; ++di)
        map->push_back((vi * d + di) * t + ti);
  return g.gather(cat, map, {t, v, d});
}

Tensor encode(const Tensor& batch, ModelParams& params, const ModelDims& dims) {
  if (batch.shape().size() != 4)
    throw DimensionError("encode expects a batch [N,C,T,V]");
  const int64_t n = batch.dim(0), c = batch.dim(1), t = batch.dim(2),
                v = batch.dim(3);
  const int64_t d = dims.latent();
  Tensor out = Tensor::zeros({n, t, v, d});
  for (int64_t i = 0; i < n; ++i) {
    Tensor joints = Tensor::zeros({c, t, v});
    std::copy_n(batch.data() + i * c * t * v, c * t * v, joints.data());
    ad::Graph g(false);
    ModelVars vars = bind_params(g, params);
    ad::Var xp = encode_seq(g, vars, dims, g.constant(std::move(joints)));
    const Tensor& xv = g.value(xp);
    std::copy_n(xv.data(), xv.numel(), out.data() + i * t * v * d);
  }
  return out;
}

PatchMaps make_patch_maps(int64_t t, int64_t v, int64_t d, int64_t p) {
  if (p < 1) throw ValidationError("patch size must be >= 1");
  PatchMaps maps;
  maps.m = (t + p - 1) / p;
  const int64_t m = maps.m;

  auto to_patches = std::make_shared<std::vector<int64_t>>();
  to_patches->reserve(static_cast<std::size_t>(m * p * v * d));
  Tensor mask = Tensor::zeros({m, p * v * d});
  for (int64_t mi = 0; mi < m; ++mi)
    for (int64_t r = 0; r < p; ++r) {
      const int64_t src_t = std::min(mi * p + r, t - 1);  // edge replication
      const bool real = mi * p + r < t;
      for (int64_t vi = 0; vi < v; ++vi)
        for (int64_t di = 0; di < d; ++di) {
          to_patches->push_back((src_t * v + vi) * d + di);
          if (real) mask[(mi * (p * v * d)) + (r * v + vi) * d + di] = 1.0;
        }
    }

  auto to_frames = std::make_shared<std::vector<int64_t>>();
  to_frames->reserve(static_cast<std::size_t>(t * v * d));
  for (int64_t ti = 0; ti < t; ++ti) {
    const int64_t mi = ti / p, r = ti % p;
    for (int64_t vi = 0; vi < v; ++vi)
      for (int64_t di = 0; di < d; ++di)
        to_frames->push_back(mi * (p * v * d) + (r * v + vi) * d + di);
  }

  maps.to_patches = std::move(to_patches);
  maps.to_frames = std::move(to_frames);
  maps.patch_mask = std::make_shared<const Tensor>(std::move(mask));
  return maps;
}

PatchGrid patchify(const Tensor& x, int64_t patch_size) {
  if (x.shape().size() != 4) throw DimensionError("patchify expects [N,T,V,D]");
  const int64_t n = x.dim(0), t = x.dim(1), v = x.dim(2), d = x.dim(3);
  PatchMaps maps = make_patch_maps(t, v, d, patch_size);
  const int64_t m = maps.m, p = patch_size;

  PatchGrid grid;
  grid.n = n;
  grid.m = m;
  grid.p = p;
  grid.v = v;
  grid.d = d;
  grid.source_frames = t;
  grid.patches = Tensor::zeros({n, m, p, v, d});
  grid.mask = Tensor::zeros({n, m, p, v, d});
  const int64_t per_seq = m * p * v * d;
  for (int64_t i = 0; i < n; ++i) {
    const double* src = x.data() + i * t * v * d;
    double* dst = grid.patches.data() + i * per_seq;
    double* msk = grid.mask.data() + i * per_seq;
    for (int64_t j = 0; j < per_seq; ++j) {
      dst[j] = src[(*maps.to_patches)[static_cast<std::size_t>(j)]];
      msk[j] = (*maps.patch_mask)[j];
    }
  }
  return grid;
}

Tensor depatchify(const PatchGrid& grid) {
  const int64_t t = grid.source_frames;
  PatchMaps maps = make_patch_maps(t, grid.v, grid.d, grid.p);
  Tensor out = Tensor::zeros({grid.n, t, grid.v, grid.d});
  const int64_t per_seq_out = t * grid.v * grid.d;
  const int64_t per_seq_in = grid.m * grid.p * grid.v * grid.d;
  for (int64_t i = 0; i < grid.n; ++i) {
    const double* src = grid.patches.data() + i * per_seq_in;
    double* dst = out.data() + i * per_seq_out;
    for (int64_t j = 0; j < per_seq_out; ++j)
      dst[j] = src[(*maps.to_frames)[static_cast<std::size_t>(j)]];
  }
  return out;
}

ad::Var decode_spatial_seq(ad::Graph& g, const ModelVars& vars,
                           const ModelDims& dims, ad::Var patch_rows,
                           int64_t t) {
  const Tensor& pv = g.value(patch_rows);
  const int64_t v = dims.joint_count, d = dims.latent(), p = dims.patch_size;
  if (pv.shape().size() != 2 || pv.dim(1) != p * v * d)
    throw DimensionError("decode_spatial_seq expects patch rows [M, P*V*D]");
  const int64_t c = dims.joint_dim;
  const int64_t pvd = p * v * d;

  std::vector<ad::Var> streams;
  streams.reserve(static_cast<std::size_t>(v));
  for (int64_t joint = 0; joint < v; ++joint) {
    auto map = std::make_shared<std::vector<int64_t>>();
    map->reserve(static_cast<std::size_t>(d * t));
    for (int64_t di = 0; di < d; ++di)
      for (int64_t ti = 0; ti < t; ++ti) {
        const int64_t mi = ti / p, r = ti % p;
        map->push_back(mi * pvd + (r * v + joint) * d + di);
      }
    ad::Var stream = g.gather(patch_rows, map, {d, t});
    streams.push_back(tcn_apply(g, vars.spatial_decoder, stream));  // [C, T]
  }
  ad::Var cat = g.concat(streams);  // [V * C * T]

  auto map = std::make_shared<std::vector<int64_t>>();
  map->reserve(static_cast<std::size_t>(c * t * v));
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t ti = 0; ti < t; ++ti)
      for (int64_t vi = 0; vi < v; ++vi)
        map->push_back((vi * c + ci) * t + ti);
  return g.gather(cat, map, {c, t, v});
}

ad::Var decode_temporal_seq(ad::Graph& g, const ModelVars& vars,
                            const ModelDims& dims, ad::Var patch_rows) {
  const Tensor& pv = g.value(patch_rows);
  const int64_t f = dims.patch_feature_dim();
  if (pv.shape().size() != 2 || pv.dim(1) != f)
    throw DimensionError("decode_temporal_seq expects patch rows [M, P*V*D]");
  const int64_t m = pv.dim(0);

  auto map = std::make_shared<std::vector<int64_t>>();
  map->reserve(static_cast<std::size_t>(f * m));
  for (int64_t fi = 0; fi < f; ++fi)
    for (int64_t mi = 0; mi < m; ++mi) map->push_back(mi * f + fi);
  ad::Var x = g.gather(patch_rows, map, {f, m});
  return mlp_apply(g, vars.temporal_decoder, x);  // [1, M]
}

}  // namespace vqseg
