#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "testutil.hpp"
#include "vqseg/errors.hpp"
#include "vqseg/model.hpp"
#include "vqseg/pipeline.hpp"
#include "vqseg/rng.hpp"

using namespace vqseg;
using testutil::finite_difference;
using testutil::grad_close;
using testutil::TestRng;

namespace {

ModelDims small_dims(int64_t c = 3, int64_t v = 4, int64_t p = 3,
                     int hidden = 6, int latent = 8) {
  ModelDims dims;
  dims.joint_dim = c;
  dims.joint_count = v;
  dims.patch_size = p;
  dims.encoder.stages = 2;
  dims.encoder.layers_per_stage = 3;
  dims.encoder.hidden = hidden;
  dims.encoder.latent = latent;
  dims.temporal.hidden = {10, 5};
  return dims;
}

}  // namespace

TEST_CASE("encode: output shape is N x T x V x D") {
  ModelDims dims = small_dims(3, 4, 3, 6, 8);
  Rng rng(1);
  ModelParams params = init_model(dims, rng);
  TestRng trng(2);
  Tensor batch = trng.tensor({2, 3, 10, 4});
  Tensor out = encode(batch, params, dims);
  CHECK(out.shape() == std::vector<int64_t>{2, 10, 4, 8});
}

TEST_CASE("encode: permuting the batch permutes outputs (no cross-sequence mixing)") {
  ModelDims dims = small_dims();
  Rng rng(3);
  ModelParams params = init_model(dims, rng);
  TestRng trng(4);
  Tensor batch = trng.tensor({3, 3, 7, 4});
  Tensor out = encode(batch, params, dims);

  Tensor swapped = Tensor::zeros({3, 3, 7, 4});
  const int64_t per = 3 * 7 * 4;
  const int perm[3] = {2, 0, 1};
  for (int64_t i = 0; i < 3; ++i)
    std::copy_n(batch.data() + perm[i] * per, per, swapped.data() + i * per);
  Tensor out2 = encode(swapped, params, dims);

  const int64_t per_out = 7 * 4 * 8;
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < per_out; ++j)
      CHECK(out2[i * per_out + j] == out[perm[i] * per_out + j]);
}

TEST_CASE("encode: permuting joints permutes outputs (shared weights)") {
  ModelDims dims = small_dims(3, 5, 3, 6, 4);
  Rng rng(5);
  ModelParams params = init_model(dims, rng);
  TestRng trng(6);
  const int64_t t = 9, v = 5;
  Tensor batch = trng.tensor({1, 3, t, v});

  std::vector<int64_t> perm = {3, 0, 4, 1, 2};
  Tensor permuted = Tensor::zeros({1, 3, t, v});
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t ti = 0; ti < t; ++ti)
      for (int64_t vi = 0; vi < v; ++vi)
        permuted[(c * t + ti) * v + vi] =
            batch[(c * t + ti) * v + perm[static_cast<std::size_t>(vi)]];

  Tensor out = encode(batch, params, dims);       // [1,t,v,8?] latent=4
  Tensor out2 = encode(permuted, params, dims);
  const int64_t d = dims.latent();
  for (int64_t ti = 0; ti < t; ++ti)
    for (int64_t vi = 0; vi < v; ++vi)
      for (int64_t di = 0; di < d; ++di)
        CHECK(out2[(ti * v + vi) * d + di] ==
              out[(ti * v + perm[static_cast<std::size_t>(vi)]) * d + di]);
}

TEST_CASE("patchify: divisible, padded, and round-trip cases") {
  TestRng trng(7);

  Tensor a = trng.tensor({2, 6, 3, 4});
  PatchGrid ga = patchify(a, 3);
  CHECK(ga.m == 2);
  for (int64_t i = 0; i < ga.mask.numel(); ++i) CHECK(ga.mask[i] == 1.0);

  Tensor b = trng.tensor({1, 7, 3, 4});
  PatchGrid gb = patchify(b, 3);
  CHECK(gb.m == 3);
  // Last patch: frame 7 and 8 replicated from frame 6 and masked out.
  int64_t masked = 0;
  for (int64_t i = 0; i < gb.mask.numel(); ++i)
    if (gb.mask[i] == 0.0) ++masked;
  CHECK(masked == 2 * 3 * 4);
  for (int64_t vi = 0; vi < 3; ++vi)
    for (int64_t di = 0; di < 4; ++di) {
      const double last = b[(6 * 3 + vi) * 4 + di];
      CHECK(gb.patches.at({0, 2, 1, vi, di}) == last);
      CHECK(gb.patches.at({0, 2, 2, vi, di}) == last);
    }

  CHECK(depatchify(gb).same_shape(b));
  Tensor rb = depatchify(gb);
  for (int64_t i = 0; i < b.numel(); ++i) CHECK(rb[i] == b[i]);
  Tensor ra = depatchify(ga);
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(ra[i] == a[i]);
}

TEST_CASE("decode_spatial: shape and joint-permutation equivariance") {
  ModelDims dims = small_dims(3, 4, 3, 6, 4);
  Rng rng(9);
  ModelParams params = init_model(dims, rng);
  TestRng trng(10);
  const int64_t t = 7;
  PatchMaps maps = make_patch_maps(t, dims.joint_count, dims.latent(),
                                   dims.patch_size);
  Tensor rows = trng.tensor({maps.m, dims.patch_feature_dim()});

  ad::Graph g(false);
  ModelVars vars = bind_params(g, params);
  ad::Var shat = decode_spatial_seq(g, vars, dims, g.constant(rows), t);
  CHECK(g.value(shat).shape() == std::vector<int64_t>{3, t, 4});

  // Permute joints inside every patch row and compare.
  std::vector<int64_t> perm = {2, 0, 3, 1};
  const int64_t p = dims.patch_size, v = dims.joint_count, d = dims.latent();
  Tensor permuted = Tensor::zeros(rows.shape());
  for (int64_t mi = 0; mi < maps.m; ++mi)
    for (int64_t r = 0; r < p; ++r)
      for (int64_t vi = 0; vi < v; ++vi)
        for (int64_t di = 0; di < d; ++di)
          permuted[mi * (p * v * d) + (r * v + vi) * d + di] =
              rows[mi * (p * v * d) +
                   (r * v + perm[static_cast<std::size_t>(vi)]) * d + di];

  ad::Graph g2(false);
  ModelVars vars2 = bind_params(g2, params);
  ad::Var shat2 = decode_spatial_seq(g2, vars2, dims, g2.constant(permuted), t);
  const Tensor& s1 = g.value(shat);
  const Tensor& s2 = g2.value(shat2);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t ti = 0; ti < t; ++ti)
      for (int64_t vi = 0; vi < v; ++vi)
        CHECK(s2[(c * t + ti) * v + vi] ==
              s1[(c * t + ti) * v + perm[static_cast<std::size_t>(vi)]]);
}

TEST_CASE("decode_spatial: FD gradient through decoder weights") {
  ModelDims dims = small_dims(2, 2, 2, 3, 3);
  dims.encoder.stages = 1;
  dims.encoder.layers_per_stage = 2;
  Rng rng(11);
  ModelParams params = init_model(dims, rng);
  TestRng trng(12);
  const int64_t t = 4;
  PatchMaps maps = make_patch_maps(t, dims.joint_count, dims.latent(),
                                   dims.patch_size);
  Tensor rows = trng.tensor({maps.m, dims.patch_feature_dim()});
  Tensor target = trng.tensor({2, t, 2});

  auto loss = [&]() {
    ad::Graph g(false);
    ModelVars vars = bind_params(g, params);
    ad::Var shat = decode_spatial_seq(g, vars, dims, g.constant(rows), t);
    return g.value(g.spatial_recon(shat, std::make_shared<const Tensor>(target), {}))[0];
  };

  ad::Graph g;
  ModelVars vars = bind_params(g, params);
  ad::Var shat = decode_spatial_seq(g, vars, dims, g.constant(rows), t);
  g.backward(g.spatial_recon(shat, std::make_shared<const Tensor>(target), {}));

  std::vector<Tensor*> tensors;
  for_each_param(params.spatial_decoder, [&](Tensor& p) { tensors.push_back(&p); });
  std::vector<ad::Var> vvars;
  for_each_param(vars.spatial_decoder, [&](ad::Var& p) { vvars.push_back(p); });
  REQUIRE(tensors.size() == vvars.size());
  for (std::size_t i = 0; i < tensors.size(); ++i)
    CHECK(grad_close(g.grad(vvars[i]), finite_difference(*tensors[i], loss)));
}

TEST_CASE("decode_temporal: shape, shared weights, FD gradients") {
  ModelDims dims = small_dims(3, 3, 2, 4, 3);
  dims.temporal.hidden = {6, 4};
  Rng rng(13);
  ModelParams params = init_model(dims, rng);
  TestRng trng(14);
  const int64_t m = 5;
  Tensor rows = trng.tensor({m, dims.patch_feature_dim()});
  // Duplicate a patch row: identical patches must get identical timestamps.
  std::copy_n(rows.data(), dims.patch_feature_dim(),
              rows.data() + 3 * dims.patch_feature_dim());

  ad::Graph g(false);
  ModelVars vars = bind_params(g, params);
  ad::Var that = decode_temporal_seq(g, vars, dims, g.constant(rows));
  CHECK(g.value(that).shape() == std::vector<int64_t>{1, m});
  CHECK(g.value(that)[0] == g.value(that)[3]);

  Tensor target = trng.tensor({1, m});
  auto loss = [&]() {
    ad::Graph ge(false);
    ModelVars v2 = bind_params(ge, params);
    ad::Var out = decode_temporal_seq(ge, v2, dims, ge.constant(rows));
    return ge.value(ge.mse(out, ge.constant(target)))[0];
  };

  ad::Graph gt;
  ModelVars vart = bind_params(gt, params);
  ad::Var out = decode_temporal_seq(gt, vart, dims, gt.constant(rows));
  gt.backward(gt.mse(out, gt.constant(target)));

  std::vector<Tensor*> tensors;
  for_each_param(params.temporal_decoder, [&](Tensor& p) { tensors.push_back(&p); });
  std::vector<ad::Var> vvars;
  for_each_param(vart.temporal_decoder, [&](ad::Var& p) { vvars.push_back(p); });
  for (std::size_t i = 0; i < tensors.size(); ++i)
    CHECK(grad_close(gt.grad(vvars[i]), finite_difference(*tensors[i], loss)));
}

TEST_CASE("encode/decode deterministic with dropout 0 and fixed seed") {
  ModelDims dims = small_dims();
  Rng rng(15);
  ModelParams params = init_model(dims, rng);
  TestRng trng(16);
  Tensor batch = trng.tensor({1, 3, 8, 4});
  Tensor a = encode(batch, params, dims);
  Tensor b = encode(batch, params, dims);
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);

  dims.encoder.dropout = 0.5;
  CHECK_THROWS_AS(init_model(dims, rng), ValidationError);
}

TEST_CASE("config validation") {
  ModelDims dims = small_dims();
  dims.encoder.stages = 0;
  Rng rng(17);
  CHECK_THROWS_AS(init_model(dims, rng), ValidationError);
  dims = small_dims();
  dims.encoder.kernel = 4;
  CHECK_THROWS_AS(init_model(dims, rng), ValidationError);
  dims = small_dims();
  dims.temporal.hidden = {};
  CHECK_THROWS_AS(init_model(dims, rng), ValidationError);
}
