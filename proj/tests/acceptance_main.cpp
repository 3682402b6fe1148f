// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Self-contained oracles (brute force, recursive DP, direct JS
// formula, corpus-derived baselines) are computed here, independent of the
// implementation paths they check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

#include "testutil.hpp"
#include "vqseg/dataset.hpp"
#include "vqseg/graph.hpp"
#include "vqseg/hvq.hpp"
#include "vqseg/io.hpp"
#include "vqseg/kernels.hpp"
#include "vqseg/losses.hpp"
#include "vqseg/metrics.hpp"
#include "vqseg/model.hpp"
#include "vqseg/pipeline.hpp"
#include "vqseg/trainer.hpp"

using namespace vqseg;
using testutil::finite_difference;
using testutil::grad_close;
using testutil::TestRng;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::vector<std::string> g_checks;

void expect(bool ok, const std::string& what) {
  if (!ok) {
    ++g_failures;
    g_checks.push_back("FAILED: " + what);
  }
}

struct CriterionScope {
  int id;
  std::string title;
  std::chrono::steady_clock::time_point start;
  int failures_at_entry;

  CriterionScope(int id_, std::string title_)
      : id(id_), title(std::move(title_)),
        start(std::chrono::steady_clock::now()),
        failures_at_entry(g_failures) {}
  ~CriterionScope() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    const bool ok = g_failures == failures_at_entry;
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(1);
    line << (ok ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << title
         << " (" << secs << "s)";
    std::cout << line.str() << std::endl;
    if (!ok) {
      for (const std::string& c : g_checks) std::cout << "         " << c << "\n";
    }
    g_checks.clear();
  }
};

fs::path work_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("vqseg_acceptance_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------- criterion 1

ModelDims toy_dims() {
  ModelDims dims;
  dims.joint_dim = 3;
  dims.joint_count = 3;
  dims.patch_size = 3;
  dims.encoder.stages = 2;
  dims.encoder.layers_per_stage = 3;
  dims.encoder.hidden = 6;
  dims.encoder.latent = 4;
  dims.temporal.hidden = {8, 4};
  return dims;
}

void check_op_gradients() {
  TestRng rng(101);

  // conv1d_dilated w.r.t. both operands.
  {
    Tensor x = rng.tensor({2, 7});
    Tensor w = rng.tensor({2, 2, 3});
    auto f = [&]() {
      ad::Graph g(false);
      return g.value(g.sum(g.conv1d_dilated(g.constant(x), g.constant(w), 2)))[0];
    };
    ad::Graph g;
    ad::Var xv = g.param(x), wv = g.param(w);
    g.backward(g.sum(g.conv1d_dilated(xv, wv, 2)));
    expect(grad_close(g.grad(xv), finite_difference(x, f)), "conv1d FD (input)");
    expect(grad_close(g.grad(wv), finite_difference(w, f)), "conv1d FD (weight)");
  }
  // pointwise / affine.
  {
    Tensor x = rng.tensor({3, 4});
    Tensor w = rng.tensor({2, 3});
    Tensor b = rng.tensor({2});
    Tensor target = rng.tensor({2, 4});
    auto f = [&]() {
      ad::Graph g(false);
      return g.value(g.mse(
          g.pointwise(g.constant(x), g.constant(w), g.constant(b)),
          g.constant(target)))[0];
    };
    ad::Graph g;
    ad::Var xv = g.param(x), wv = g.param(w), bv = g.param(b);
    g.backward(g.mse(g.pointwise(xv, wv, bv), g.constant(target)));
    expect(grad_close(g.grad(xv), finite_difference(x, f)), "pointwise FD (input)");
    expect(grad_close(g.grad(wv), finite_difference(w, f)), "pointwise FD (weight)");
    expect(grad_close(g.grad(bv), finite_difference(b, f)), "pointwise FD (bias)");
  }
  // Elementwise ops and reductions through a composite expression.
  {
    Tensor a = rng.tensor({3, 5});
    Tensor b = rng.tensor({3, 5});
    auto build = [](ad::Graph& g, ad::Var x, ad::Var y) {
      ad::Var h = g.relu(g.add(g.mul(x, y), g.scale(y, 0.3)));
      return g.add(g.sum(h), g.mse(x, y));
    };
    auto f = [&]() {
      ad::Graph g(false);
      return g.value(build(g, g.constant(a), g.constant(b)))[0];
    };
    ad::Graph g;
    ad::Var av = g.param(a), bv = g.param(b);
    g.backward(build(g, av, bv));
    expect(grad_close(g.grad(av), finite_difference(a, f)),
           "relu/add/mul/scale/sum/mse FD (a)");
    expect(grad_close(g.grad(bv), finite_difference(b, f)),
           "relu/add/mul/scale/sum/mse FD (b)");
  }
  // gather + concat.
  {
    Tensor a = rng.tensor({6});
    auto map = std::make_shared<const std::vector<int64_t>>(
        std::vector<int64_t>{5, 0, 0, 3, 2, 2, 1, 4});
    auto f = [&]() {
      ad::Graph g(false);
      ad::Var c = g.concat({g.constant(a), g.constant(a)});
      ad::Var gt = g.gather(c, map, {8});
      return g.value(g.sum(g.mul(gt, gt)))[0];
    };
    ad::Graph g;
    ad::Var av = g.param(a);
    ad::Var c = g.concat({av, av});
    ad::Var gt = g.gather(c, map, {8});
    g.backward(g.sum(g.mul(gt, gt)));
    expect(grad_close(g.grad(av), finite_difference(a, f)), "gather/concat FD");
  }
}

void check_loss_gradients() {
  TestRng rng(211);
  // Commitment (Eqs. 5-6): quantized side frozen, genuine derivative in input.
  {
    Tensor p = rng.tensor({4, 6});
    Tensor q = rng.tensor({4, 6});
    auto f = [&]() { return commitment(p, q); };
    ad::Graph g;
    ad::Var pv = g.param(p);
    g.backward(commitment_loss(g, pv, q, nullptr));
    expect(grad_close(g.grad(pv), finite_difference(p, f)), "commitment FD");
  }
  // Spatial reconstruction (Eq. 7).
  {
    Tensor s = rng.tensor({3, 4, 3});
    Tensor shat = rng.tensor({3, 4, 3});
    auto f = [&]() { return spatial_recon(s, shat); };
    ad::Graph g;
    ad::Var hv = g.param(shat);
    g.backward(spatial_recon_loss(g, hv, s));
    expect(grad_close(g.grad(hv), finite_difference(shat, f)), "spatial FD");
  }
  // Temporal reconstruction (Eq. 8).
  {
    Tensor t = rng.tensor({1, 5}, 0, 1);
    Tensor that = rng.tensor({1, 5}, 0, 1);
    auto f = [&]() { return temporal_recon(t, that); };
    ad::Graph g;
    ad::Var hv = g.param(that);
    g.backward(temporal_recon_loss(g, hv, t));
    expect(grad_close(g.grad(hv), finite_difference(that, f)), "temporal FD");
  }
}

// Relaxed Eq. 9 composite: quantized rows frozen as p + offset so the exact
// derivative equals the straight-through convention the training graph uses.
struct RelaxedPieces {
  Tensor qz0, qa0, offz, offa;
};

ad::Var build_relaxed_total(ad::Graph& g, const ModelVars& vars,
                            const ModelDims& dims, const Tensor& joints,
                            const RelaxedPieces& rp, const LossWeights& w) {
  const int64_t t = joints.dim(1);
  ad::Var xp = encode_seq(g, vars, dims, g.constant(joints));
  PatchMaps maps = make_patch_maps(t, dims.joint_count, dims.latent(),
                                   dims.patch_size);
  ad::Var patches = g.gather(xp, maps.to_patches,
                             {maps.m, dims.patch_feature_dim()});
  ad::Var qz = g.add(patches, g.constant(rp.offz));
  ad::Var qa = g.add(patches, g.constant(rp.offa));

  ad::Var commit_z = g.masked_sqdiff_sum(patches, g.constant(rp.qz0),
                                         maps.patch_mask);
  ad::Var commit_a = g.masked_sqdiff_sum(qz, g.constant(rp.qa0), maps.patch_mask);
  ad::Var shat = decode_spatial_seq(g, vars, dims, qa, t);
  ad::Var spatial = spatial_recon_loss(g, shat, joints);
  ad::Var that = decode_temporal_seq(g, vars, dims, qz);
  Timestamps ts = make_timestamps(t, dims.patch_size);
  Tensor tt = Tensor::zeros({1, maps.m});
  for (int64_t i = 0; i < maps.m; ++i) tt[i] = ts.values[static_cast<std::size_t>(i)];
  ad::Var temporal = temporal_recon_loss(g, that, tt);
  return total_loss(g, commit_z, commit_a, spatial, temporal, w);
}

void check_composite_gradient() {
  const ModelDims dims = toy_dims();  // N=1, T=6, V=3, C=3, D=4, P=3
  Rng rng(77);
  ModelParams params = init_model(dims, rng);
  TestRng trng(307);
  Tensor joints = trng.tensor({3, 6, 3});

  HvqConfig hcfg;
  hcfg.k = 2;
  hcfg.alpha = 2;
  std::vector<Codebook> books = make_hierarchy(hcfg, dims.patch_feature_dim());
  for (Codebook& cb : books)
    for (int64_t i = 0; i < cb.prototypes.numel(); ++i)
      cb.prototypes[i] = trng.uniform(-1, 1);

  // Freeze quantization at the center point.
  Tensor p0 = embed_patches(params, dims, joints);
  Assignment assign = quantize_hierarchy(p0, books);
  RelaxedPieces rp;
  rp.qz0 = assign.levels[0].quantized;
  rp.qa0 = assign.levels[1].quantized;
  rp.offz = Tensor::zeros(p0.shape());
  rp.offa = Tensor::zeros(p0.shape());
  for (int64_t i = 0; i < p0.numel(); ++i) {
    rp.offz[i] = rp.qz0[i] - p0[i];
    rp.offa[i] = rp.qa0[i] - p0[i];
  }

  LossWeights w;  // defaults: 1, 0.001, 0.2

  auto feval = [&]() {
    ad::Graph g(false);
    ModelVars vars = bind_params(g, params);
    return g.value(build_relaxed_total(g, vars, dims, joints, rp, w))[0];
  };

  ad::Graph g;
  ModelVars vars = bind_params(g, params);
  g.backward(build_relaxed_total(g, vars, dims, joints, rp, w));

  std::vector<Tensor*> tensors;
  for_each_param(params, [&](Tensor& t) { tensors.push_back(&t); });
  std::vector<ad::Var> vvars;
  for_each_param(vars, [&](ad::Var& v) { vvars.push_back(v); });
  int64_t checked = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (!grad_close(g.grad(vvars[i]), finite_difference(*tensors[i], feval))) {
      expect(false, "composite FD mismatch at parameter " + std::to_string(i));
      return;
    }
    checked += tensors[i]->numel();
  }
  expect(checked > 1000, "composite FD covered the full parameter set");

  // The real quantized training graph must reproduce the relaxed gradients.
  ad::Graph gq;
  ModelVars vq = bind_params(gq, params);
  Routing routing;
  SeqForward fwd = forward_sequence(gq, vq, dims, books, joints, routing);
  SeqLosses losses = build_losses(gq, fwd, joints, w);
  gq.backward(losses.total);
  const double relaxed_value = feval();
  expect(std::fabs(losses.report.total - relaxed_value) <=
             1e-9 * std::max(1.0, std::fabs(relaxed_value)),
         "real and relaxed composite agree in value");
  std::vector<ad::Var> qvars;
  for_each_param(vq, [&](ad::Var& v) { qvars.push_back(v); });
  for (std::size_t i = 0; i < qvars.size(); ++i) {
    const Tensor ga = gq.grad(qvars[i]);
    const Tensor gb = g.grad(vvars[i]);
    for (int64_t j = 0; j < ga.numel(); ++j)
      if (std::fabs(ga[j] - gb[j]) > 1e-12 * std::max(1.0, std::fabs(gb[j]))) {
        expect(false, "real vs relaxed gradient mismatch at parameter " +
                          std::to_string(i));
        return;
      }
  }
}

void criterion_1() {
  CriterionScope scope(1, "gradient suite (ops, losses, Eq. 9 composite)");
  check_op_gradients();
  check_loss_gradients();
  check_composite_gradient();
}

// ---------------------------------------------------------------- criterion 2

void criterion_2() {
  CriterionScope scope(2, "VQ suite (brute force, EMA, dead codes, serialization)");
  TestRng rng(401);

  // Quantization equals brute force on 200 random instances.
  for (int round = 0; round < 200; ++round) {
    const int64_t size = 1 + rng.uniform_int(10);
    const int64_t dim = 1 + rng.uniform_int(8);
    Codebook cb = make_codebook(size, dim);
    for (int64_t i = 0; i < cb.prototypes.numel(); ++i)
      cb.prototypes[i] = rng.uniform(-2, 2);
    Tensor patch = rng.tensor({1, dim}, -2, 2);
    LevelAssignment a = quantize_against(patch, cb);
    int64_t best = 0;
    double best_d = 1e300;
    for (int64_t j = 0; j < size; ++j) {
      double d = 0;
      for (int64_t k = 0; k < dim; ++k) {
        const double diff = patch[k] - cb.prototypes[j * dim + k];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    expect(a.indices[0] == best, "brute-force quantization round " +
                                     std::to_string(round));
    if (a.indices[0] != best) return;
  }

  // EMA hand examples exact to 1e-12.
  {
    Codebook cb = make_codebook(1, 1);
    cb.prototypes[0] = 1.0;
    cb.ema_sum[0] = 1.0;
    cb.ema_count[0] = 1.0;
    ema_update(cb, Tensor::from({1, 1}, {3.0}), {0}, 0.5);
    expect(std::fabs(cb.prototypes[0] - 2.0) <= 1e-12, "EMA example 1 (-> 2.0)");
    expect(std::fabs(cb.ema_count[0] - 1.0) <= 1e-12, "EMA example 1 count");

    Codebook cc = make_codebook(1, 1);
    cc.prototypes[0] = 1.25;
    cc.ema_count[0] = 1.0;
    ema_update(cc, Tensor::zeros({0, 1}), {}, 0.5);
    expect(std::fabs(cc.prototypes[0] - 1.25) <= 1e-12,
           "EMA zero-assignment fixed point");
    expect(std::fabs(cc.ema_count[0] - 0.5) <= 1e-12, "EMA zero-assignment count");

    Codebook cd = make_codebook(1, 1);
    cd.prototypes[0] = 2.0;
    cd.ema_count[0] = 2.0;
    ema_update(cd, Tensor::from({2, 1}, {1.0, 3.0}), {0, 0}, 0.5);
    expect(std::fabs(cd.prototypes[0] - 1.5) <= 1e-12, "EMA example 3 (-> 1.5)");
  }

  // Dead-code replacement triggers exactly at stale_patience.
  {
    Codebook cb = make_codebook(2, 1);
    cb.prototypes[0] = 100.0;
    Tensor batch = Tensor::from({3, 1}, {1.0, 2.0, 3.0});
    Rng engine(12);
    const int patience = 5;
    for (int b = 1; b <= patience; ++b) {
      ema_update(cb, batch, {1, 1, 1}, 0.5);
      auto replaced = replace_dead(cb, batch, 1.5, patience, engine);
      if (b < patience) {
        expect(replaced.empty(), "no replacement before stale_patience");
      } else {
        expect(replaced.size() == 1 && replaced[0] == 0,
               "replacement exactly at stale_patience");
        const double v = cb.prototypes[0];
        expect(v == 1.0 || v == 2.0 || v == 3.0,
               "replacement value drawn from the current batch");
      }
    }
  }

  // Serialization round-trips bit-exactly.
  {
    Codebook cb = make_codebook(6, 9);
    for (int64_t i = 0; i < cb.prototypes.numel(); ++i) {
      cb.prototypes[i] = rng.uniform(-3, 3);
      cb.ema_sum[i] = rng.uniform(-3, 3);
    }
    for (auto& c : cb.ema_count) c = rng.uniform(0, 9);
    cb.stale_batches[3] = 2;
    io::ByteWriter w;
    serialize_codebook(w, cb);
    io::ByteReader r(w.buffer(), "acc");
    Codebook back = deserialize_codebook(r);
    expect(std::memcmp(back.prototypes.data(), cb.prototypes.data(),
                       static_cast<std::size_t>(cb.prototypes.numel()) *
                           sizeof(double)) == 0 &&
               std::memcmp(back.ema_sum.data(), cb.ema_sum.data(),
                           static_cast<std::size_t>(cb.ema_sum.numel()) *
                               sizeof(double)) == 0 &&
               back.ema_count == cb.ema_count &&
               back.stale_batches == cb.stale_batches,
           "codebook serialization bit-exact round trip");
  }
}

// ---------------------------------------------------------------- criterion 3

int64_t brute_force_best(const std::vector<std::vector<int64_t>>& counts) {
  const int rows = static_cast<int>(counts.size());
  const int cols = static_cast<int>(counts[0].size());
  std::vector<int> idx(static_cast<std::size_t>(std::max(rows, cols)));
  std::iota(idx.begin(), idx.end(), 0);
  int64_t best = 0;
  do {
    int64_t score = 0;
    for (int i = 0; i < rows; ++i)
      if (idx[static_cast<std::size_t>(i)] < cols)
        score += counts[static_cast<std::size_t>(i)]
                       [static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    best = std::max(best, score);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return best;
}

int64_t recursive_levenshtein(const std::vector<int>& a, std::size_t i,
                              const std::vector<int>& b, std::size_t j) {
  if (i == a.size()) return static_cast<int64_t>(b.size() - j);
  if (j == b.size()) return static_cast<int64_t>(a.size() - i);
  return std::min({recursive_levenshtein(a, i + 1, b, j + 1) +
                       (a[i] != b[j] ? 1 : 0),
                   recursive_levenshtein(a, i + 1, b, j) + 1,
                   recursive_levenshtein(a, i, b, j + 1) + 1});
}

void criterion_3() {
  CriterionScope scope(3, "metrics oracle suite (Hungarian, Edit, F1, MoF, JSD)");
  TestRng rng(577);

  for (int round = 0; round < 100; ++round) {
    const int rows = 1 + static_cast<int>(rng.uniform_int(6));
    const int cols = 1 + static_cast<int>(rng.uniform_int(6));
    std::vector<std::vector<int64_t>> counts(
        static_cast<std::size_t>(rows),
        std::vector<int64_t>(static_cast<std::size_t>(cols), 0));
    for (auto& row : counts)
      for (auto& c : row) c = rng.uniform_int(60);
    const int64_t got = hungarian_match(counts).matched_frames;
    const int64_t want = brute_force_best(counts);
    expect(got == want, "hungarian equals exhaustive search, round " +
                            std::to_string(round));
    if (got != want) return;
  }

  for (int round = 0; round < 100; ++round) {
    auto random_labels = [&]() {
      std::vector<int> v;
      const int64_t n = 1 + rng.uniform_int(12);
      int prev = -1;
      for (int64_t i = 0; i < n; ++i) {
        int l;
        do {
          l = static_cast<int>(rng.uniform_int(4));
        } while (l == prev);
        prev = l;
        v.push_back(l);
      }
      return v;
    };
    const std::vector<int> sa = random_labels();
    const std::vector<int> sb = random_labels();
    std::vector<int> frames_a, frames_b;
    for (int l : sa) frames_a.insert(frames_a.end(), 2, l);
    for (int l : sb) frames_b.insert(frames_b.end(), 2, l);
    const double got = edit_score(segments_from_labels(frames_a),
                                  segments_from_labels(frames_b));
    const double want =
        100.0 * (1.0 - static_cast<double>(recursive_levenshtein(sa, 0, sb, 0)) /
                           static_cast<double>(std::max(sa.size(), sb.size())));
    expect(std::fabs(got - want) <= 1e-9, "edit equals recursive oracle, round " +
                                              std::to_string(round));
    if (std::fabs(got - want) > 1e-9) return;
  }

  // F1 threshold boundary: IoU 0.3 -> TP at 0.25, FP at 0.5.
  {
    SegmentList gt;
    gt.total_frames = 10;
    gt.segments = {{7, 0, 10}};
    SegmentList pred;
    pred.total_frames = 10;
    pred.segments = {{7, 0, 3}};
    expect(f1_at(gt, pred, 0.25) == 100.0, "IoU 0.3 is a TP at tau=0.25");
    expect(f1_at(gt, pred, 0.50) == 0.0, "IoU 0.3 is an FP at tau=0.5");
  }

  // MoF micro example is exactly 80.
  {
    const std::vector<int> gt = {0, 0, 1, 1, 1};
    const std::vector<int> clusters = {1, 1, 1, 0, 0};
    std::vector<std::vector<int64_t>> confusion(2, std::vector<int64_t>(2, 0));
    for (std::size_t t = 0; t < gt.size(); ++t)
      ++confusion[static_cast<std::size_t>(clusters[t])]
                 [static_cast<std::size_t>(gt[t])];
    const ClusterMapping m = hungarian_match(confusion);
    std::vector<int> mapped;
    for (int c : clusters) mapped.push_back(m.apply(c));
    expect(mof_percent({gt}, {mapped}) == 80.0, "MoF micro example == 80.0");
  }

  // JSD: identical -> 0, disjoint -> 100, mixed matches the JS formula.
  {
    std::vector<int> two_segs;
    two_segs.insert(two_segs.end(), 10, 0);
    two_segs.insert(two_segs.end(), 30, 1);
    const SegmentList gt = segments_from_labels(two_segs);
    expect(jsd_bias({{gt, gt, std::nullopt}}) == 0.0, "JSD identical == 0");

    std::vector<int> shorts, longs;
    shorts.insert(shorts.end(), 10, 0);
    shorts.insert(shorts.end(), 15, 1);
    longs.insert(longs.end(), 100, 0);
    longs.insert(longs.end(), 110, 1);
    const double disjoint = jsd_bias({{segments_from_labels(shorts),
                                       segments_from_labels(longs),
                                       std::nullopt}});
    expect(std::fabs(disjoint - 100.0) <= 1e-9, "JSD disjoint == 100");

    std::vector<int> pred_labels;
    pred_labels.insert(pred_labels.end(), 10, 0);
    pred_labels.insert(pred_labels.end(), 10, 1);
    const double got =
        jsd_bias({{gt, segments_from_labels(pred_labels), std::nullopt}});
    // Direct evaluation: gt hist [.5,.5], pred [1,0], m = [.75,.25].
    const double div = 0.5 * (0.5 * std::log2(0.5 / 0.75) +
                              0.5 * std::log2(0.5 / 0.25)) +
                       0.5 * (1.0 * std::log2(1.0 / 0.75));
    const double want = 100.0 * std::sqrt(div);
    expect(std::fabs(got - want) <= 1e-9, "JSD mixed case matches JS formula");
  }
}

// ---------------------------------------------------------------- criterion 4

void criterion_4() {
  CriterionScope scope(4, "loss fidelity (hand values, invariance, isolation)");

  expect(spatial_recon(Tensor::from({1, 1, 2}, {0, 1}),
                       Tensor::from({1, 1, 2}, {0, 2})) == 4.5,
         "spatial hand example == 4.5 exactly");

  {
    TestRng rng(701);
    Tensor s = rng.tensor({3, 5, 4});
    Tensor shat = rng.tensor({3, 5, 4});
    Tensor shifted = shat;
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < 5 * 4; ++i)
        shifted[c * 20 + i] += 0.7 * static_cast<double>(c + 1);
    expect(std::fabs(spatial_recon(s, shat) - spatial_recon(s, shifted)) <= 1e-9,
           "Eq. 7 invariant to rigid translation (1e-9)");
  }

  expect(temporal_recon(Tensor::from({1, 2}, {0, 1}),
                        Tensor::from({1, 2}, {0.5, 0.5})) == 0.25,
         "temporal hand example == 0.25 exactly");

  {
    LossReport parts{2, 3, 10, 4, 0};
    LossWeights w;
    expect(weighted_total(parts, w) == 5.81, "Eq. 9 weighted sum == 5.81 exactly");
  }

  // Gradient isolation: zeroing a weight removes that term's gradient.
  {
    const ModelDims dims = toy_dims();
    Rng rng(31);
    ModelParams params = init_model(dims, rng);
    TestRng trng(811);
    Tensor joints = trng.tensor({3, 6, 3});
    HvqConfig hcfg;
    hcfg.k = 2;
    std::vector<Codebook> books = make_hierarchy(hcfg, dims.patch_feature_dim());
    for (Codebook& cb : books)
      for (int64_t i = 0; i < cb.prototypes.numel(); ++i)
        cb.prototypes[i] = trng.uniform(-1, 1);

    auto grads_with = [&](LossWeights w) {
      ad::Graph g;
      ModelVars vars = bind_params(g, params);
      SeqForward fwd = forward_sequence(g, vars, dims, books, joints, Routing{});
      SeqLosses losses = build_losses(g, fwd, joints, w);
      g.backward(losses.total);
      double spatial_norm = 0, temporal_norm = 0, all_norm = 0;
      for_each_param(vars.spatial_decoder, [&](ad::Var& v) {
        const Tensor t = g.grad(v);
        for (int64_t i = 0; i < t.numel(); ++i) spatial_norm += std::fabs(t[i]);
      });
      for_each_param(vars.temporal_decoder, [&](ad::Var& v) {
        const Tensor t = g.grad(v);
        for (int64_t i = 0; i < t.numel(); ++i) temporal_norm += std::fabs(t[i]);
      });
      for_each_param(vars, [&](ad::Var& v) {
        const Tensor t = g.grad(v);
        for (int64_t i = 0; i < t.numel(); ++i) all_norm += std::fabs(t[i]);
      });
      return std::array<double, 3>{spatial_norm, temporal_norm, all_norm};
    };

    LossWeights all;
    const auto base = grads_with(all);
    expect(base[0] > 0 && base[1] > 0, "baseline: every term contributes");

    LossWeights no_spat = all;
    no_spat.lambda_spat = 0;
    expect(grads_with(no_spat)[0] == 0.0,
           "lambda_spat = 0 removes spatial-decoder gradients entirely");

    LossWeights no_temp = all;
    no_temp.lambda_temp = 0;
    expect(grads_with(no_temp)[1] == 0.0,
           "lambda_temp = 0 removes temporal-decoder gradients entirely");

    LossWeights none;
    none.lambda_commit = 0;
    none.lambda_spat = 0;
    none.lambda_temp = 0;
    expect(grads_with(none)[2] == 0.0, "all weights 0 -> all gradients 0");
  }
}

// ------------------------------------------------------- criteria 5, 6 and 7

struct PipelineResult {
  EvalReport report;
  std::string report_json;
  DatasetManifest manifest;
};

SynthConfig criterion5_corpus() {
  SynthConfig s;  // K=4, 20 sequences, ~8 segments each
  s.classes = 4;
  s.sequences = 20;
  s.mean_segments = 8;
  s.seed = 11;
  s.patch_size = 10;
  return s;
}

TrainConfig criterion5_config() {
  TrainConfig cfg;  // spec defaults: levels=2, alpha=2, lambda/lr/Adam/widths
  cfg.epochs = 15;  // <= 100
  cfg.seed = 5;
  cfg.patch_size = 10;
  return cfg;
}

PipelineResult run_pipeline(const fs::path& dir, const SynthConfig& corpus,
                            const TrainConfig& cfg) {
  PipelineResult out;
  out.manifest = synth_generate(corpus, dir / "data");
  ModelState state = init_state(cfg, out.manifest.k_gt, out.manifest.joint_dim,
                                out.manifest.joint_count);
  std::ofstream log(dir / "train.log.csv");
  train(state, out.manifest, &log);
  save_checkpoint(state, dir / "model.ckpt");

  const fs::path pred_dir = dir / "preds";
  fs::create_directories(pred_dir);
  std::map<std::string, std::vector<int>> predictions;
  for (std::size_t i = 0; i < out.manifest.items.size(); ++i) {
    const SkeletonSequence seq = load_sequence(out.manifest, i);
    std::vector<int> labels =
        predict_labels(state.params, state.dims, state.books, seq.joints);
    write_prediction_file(pred_dir, seq.id, labels);
    predictions[seq.id] = std::move(labels);
  }
  out.report = evaluate(out.manifest, predictions);
  out.report_json = report_to_json(out.report);
  io::write_file(dir / "report.json", out.report_json);
  return out;
}

// Corpus-derived baselines, computed by the harness itself.
struct Baselines {
  double majority_mof = 0;
  double degenerate_jsd = 0;
};

Baselines compute_baselines(const DatasetManifest& manifest) {
  std::map<int, int64_t> class_frames;
  int64_t total = 0;
  std::vector<VideoSegments> degenerate;
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    const SkeletonSequence seq = load_sequence(manifest, i);
    const SegmentList gt = segments_from_labels(*seq.labels);
    for (int l : *seq.labels) {
      ++class_frames[l];
      ++total;
    }
    std::vector<int> single(static_cast<std::size_t>(seq.frames()), 0);
    degenerate.push_back({gt, segments_from_labels(single), seq.activity});
  }
  Baselines b;
  int64_t best = 0;
  for (const auto& [cls, frames] : class_frames) best = std::max(best, frames);
  b.majority_mof = 100.0 * static_cast<double>(best) / static_cast<double>(total);
  b.degenerate_jsd = jsd_bias(degenerate);
  return b;
}

std::string g_first_report_json;

void criterion_5() {
  CriterionScope scope(5, "synthetic end-to-end vs corpus baselines");
  const fs::path dir = work_dir("e2e");
  const PipelineResult result =
      run_pipeline(dir, criterion5_corpus(), criterion5_config());
  const Baselines base = compute_baselines(result.manifest);
  g_first_report_json = result.report_json;

  std::ostringstream detail;
  detail.setf(std::ios::fixed);
  detail.precision(2);
  detail << "MoF " << result.report.mof << " vs majority baseline "
         << base.majority_mof << " + 20; JSD " << result.report.jsd
         << " vs degenerate " << base.degenerate_jsd;
  std::cout << "         " << detail.str() << "\n";

  expect(result.report.mof >= base.majority_mof + 20.0,
         "MoF exceeds the majority-class baseline by >= 20 points");
  expect(result.report.jsd < base.degenerate_jsd,
         "JSD below the single-segment degenerate predictor");
}

void criterion_6() {
  CriterionScope scope(6, "ablation mechanics (levels, alpha, routing, weights)");
  const fs::path dir = work_dir("ablations");
  SynthConfig corpus = criterion5_corpus();
  corpus.sequences = 8;
  const DatasetManifest manifest = synth_generate(corpus, dir / "data");

  TrainConfig small;
  small.epochs = 1;
  small.seed = 3;
  small.patch_size = 10;
  small.encoder.hidden = 16;
  small.encoder.latent = 8;
  small.temporal.hidden = {32, 16};

  struct Variant {
    std::string name;
    std::function<void(TrainConfig&)> tweak;
  };
  std::vector<Variant> variants;
  for (int levels : {1, 2, 3})
    variants.push_back({"levels=" + std::to_string(levels),
                        [levels](TrainConfig& c) { c.hvq.levels = levels; }});
  for (int alpha : {1, 2, 3})
    variants.push_back({"alpha=" + std::to_string(alpha),
                        [alpha](TrainConfig& c) { c.hvq.alpha = alpha; }});
  for (auto src : {Routing::Source::kQZ, Routing::Source::kQA,
                   Routing::Source::kBoth}) {
    variants.push_back({"spatial_input=" + routing_source_name(src),
                        [src](TrainConfig& c) { c.routing.spatial = src; }});
    variants.push_back({"temporal_input=" + routing_source_name(src),
                        [src](TrainConfig& c) { c.routing.temporal = src; }});
  }
  variants.push_back({"lambda_commit=0",
                      [](TrainConfig& c) { c.weights.lambda_commit = 0; }});
  variants.push_back({"lambda_spat=0",
                      [](TrainConfig& c) { c.weights.lambda_spat = 0; }});
  variants.push_back({"lambda_temp=0",
                      [](TrainConfig& c) { c.weights.lambda_temp = 0; }});

  for (const Variant& v : variants) {
    TrainConfig cfg = small;
    v.tweak(cfg);
    try {
      ModelState state = init_state(cfg, manifest.k_gt, manifest.joint_dim,
                                    manifest.joint_count);
      train(state, manifest, nullptr);
      std::map<std::string, std::vector<int>> predictions;
      for (std::size_t i = 0; i < manifest.items.size(); ++i) {
        const SkeletonSequence seq = load_sequence(manifest, i);
        predictions[seq.id] =
            predict_labels(state.params, state.dims, state.books, seq.joints);
      }
      const EvalReport report = evaluate(manifest, predictions);
      expect(report.mof >= 0.0 && report.mof <= 100.0,
             "ablation " + v.name + " produced a valid report");
    } catch (const std::exception& e) {
      expect(false, "ablation " + v.name + " failed: " + e.what());
    }
  }
}

void criterion_7() {
  CriterionScope scope(7, "determinism: rerun reproduces the report byte-identically");
  const fs::path dir = work_dir("e2e_rerun");
  const PipelineResult rerun =
      run_pipeline(dir, criterion5_corpus(), criterion5_config());
  expect(!g_first_report_json.empty(), "criterion 5 produced a report");
  expect(rerun.report_json == g_first_report_json,
         "rerun metrics report is byte-identical");
}

}  // namespace

int main() {
  std::cout << "acceptance suite (kernels backend: "
            << kernels::active().name << ")\n";
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  if (g_failures != 0) {
    std::cout << g_failures << " criterion check(s) failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
