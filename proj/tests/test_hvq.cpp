#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "testutil.hpp"
#include "vqseg/errors.hpp"
#include "vqseg/hvq.hpp"
#include "vqseg/io.hpp"

using namespace vqseg;
using testutil::TestRng;

namespace {

Codebook codebook_from(std::vector<std::vector<double>> rows) {
  const int64_t size = static_cast<int64_t>(rows.size());
  const int64_t dim = static_cast<int64_t>(rows[0].size());
  Codebook cb = make_codebook(size, dim);
  for (int64_t j = 0; j < size; ++j)
    for (int64_t d = 0; d < dim; ++d)
      cb.prototypes[j * dim + d] = rows[static_cast<std::size_t>(j)]
                                       [static_cast<std::size_t>(d)];
  cb.ema_sum = cb.prototypes;
  return cb;
}

}  // namespace

TEST_CASE("quantize: nearest prototype, identity, tie-break") {
  Codebook z = codebook_from({{0, 0}, {2, 2}});

  LevelAssignment a =
      quantize_against(Tensor::from({1, 2}, {0.4, 0.1}), z);
  CHECK(a.indices[0] == 0);

  LevelAssignment b = quantize_against(Tensor::from({1, 2}, {2, 2}), z);
  CHECK(b.indices[0] == 1);
  CHECK(b.quantized[0] == 2.0);
  CHECK(b.quantized[1] == 2.0);

  // Equidistant -> lowest index wins.
  LevelAssignment c = quantize_against(Tensor::from({1, 2}, {1, 1}), z);
  CHECK(c.indices[0] == 0);

  CHECK_THROWS_AS(quantize_against(Tensor::from({1, 3}, {1, 1, 1}), z),
                  DimensionError);
}

TEST_CASE("quantize level 2: operates on level-1 prototypes") {
  Codebook z = codebook_from({{0}, {1}, {4}});
  Codebook a = codebook_from({{0.4}, {3}});

  Tensor patches = Tensor::from({2, 1}, {0.9, 3.8});
  Assignment h = quantize_hierarchy(patches, {z, a});
  // patch 0.9 -> z=1 -> a=0.4 ; patch 3.8 -> z=4 -> a=3
  CHECK(h.levels[0].indices[0] == 1);
  CHECK(h.levels[0].indices[1] == 2);
  CHECK(h.levels[1].indices[0] == 0);
  CHECK(h.levels[1].indices[1] == 1);
  CHECK(h.levels[1].quantized[0] == 0.4);
  CHECK(h.levels[1].quantized[1] == 3.0);

  // Identical codebooks: nearest of self is self.
  Assignment same = quantize_hierarchy(patches, {z, z});
  for (int64_t i = 0; i < 2; ++i)
    CHECK(same.levels[1].quantized[i] == same.levels[0].quantized[i]);

  // Single-entry top codebook absorbs everything.
  Codebook one = codebook_from({{7}});
  Assignment ab = quantize_hierarchy(patches, {z, one});
  CHECK(ab.levels[1].indices[0] == 0);
  CHECK(ab.levels[1].indices[1] == 0);
}

TEST_CASE("quantize: equals brute force on random instances") {
  TestRng rng(5);
  for (int round = 0; round < 200; ++round) {
    const int64_t size = 1 + rng.uniform_int(12);
    const int64_t dim = 1 + rng.uniform_int(6);
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
    CHECK(a.indices[0] == best);
    // Optimality of the chosen prototype against every other.
    for (int64_t j = 0; j < size; ++j) {
      double d = 0, chosen = 0;
      for (int64_t k = 0; k < dim; ++k) {
        const double dj = patch[k] - cb.prototypes[j * dim + k];
        const double dc = patch[k] - a.quantized[k];
        d += dj * dj;
        chosen += dc * dc;
      }
      CHECK(chosen <= d + 1e-15);
    }
  }
}

TEST_CASE("quantize: output rows are bitwise codebook entries, idempotent") {
  TestRng rng(13);
  Codebook cb = make_codebook(6, 4);
  for (int64_t i = 0; i < cb.prototypes.numel(); ++i)
    cb.prototypes[i] = rng.uniform(-1, 1);
  Tensor inputs = rng.tensor({20, 4});
  LevelAssignment a = quantize_against(inputs, cb);
  for (int64_t r = 0; r < 20; ++r) {
    const int32_t j = a.indices[static_cast<std::size_t>(r)];
    CHECK(std::memcmp(a.quantized.data() + r * 4,
                      cb.prototypes.data() + static_cast<int64_t>(j) * 4,
                      4 * sizeof(double)) == 0);
  }
  LevelAssignment again = quantize_against(a.quantized, cb);
  CHECK(again.indices == a.indices);
}

TEST_CASE("ema_update: hand examples exact") {
  // beta=0.5, prototype 1.0, prior N=1, one assigned input 3.0 -> 2.0
  {
    Codebook cb = codebook_from({{1.0}});
    cb.ema_count[0] = 1.0;
    ema_update(cb, Tensor::from({1, 1}, {3.0}), {0}, 0.5);
    CHECK(cb.ema_count[0] == 1.0);
    CHECK(cb.prototypes[0] == 2.0);
  }
  // zero assignments, prior N=1 -> Nhat=0.5, prototype unchanged
  {
    Codebook cb = codebook_from({{1.25}});
    cb.ema_count[0] = 1.0;
    ema_update(cb, Tensor::zeros({0, 1}), {}, 0.5);
    CHECK(cb.ema_count[0] == 0.5);
    CHECK(cb.prototypes[0] == 1.25);
  }
  // beta=0.5, prototype 2.0, prior N=2, inputs {1,3} -> 1.5
  {
    Codebook cb = codebook_from({{2.0}});
    cb.ema_count[0] = 2.0;
    ema_update(cb, Tensor::from({2, 1}, {1.0, 3.0}), {0, 0}, 0.5);
    CHECK(cb.ema_count[0] == 2.0);
    CHECK(cb.prototypes[0] == 1.5);
  }
}

TEST_CASE("ema_update: beta near 1 freezes prototypes; constant inputs attract") {
  TestRng rng(31);
  Codebook cb = make_codebook(3, 2);
  for (int64_t i = 0; i < cb.prototypes.numel(); ++i)
    cb.prototypes[i] = rng.uniform(-1, 1);
  Tensor before = cb.prototypes;
  Tensor inputs = rng.tensor({9, 2});
  std::vector<int32_t> idx = {0, 1, 2, 0, 1, 2, 0, 1, 2};
  ema_update(cb, inputs, idx, 1.0 - 1e-12);
  for (int64_t i = 0; i < cb.prototypes.numel(); ++i)
    CHECK(cb.prototypes[i] == doctest::Approx(before[i]).epsilon(1e-9));

  // Constant input c, one assignment per batch: z' - c = beta (z - c), so the
  // distance to c is monotonically shrinking. (With larger per-batch counts
  // the literal update rule has a fixed point short of the input mean.)
  Codebook cc = codebook_from({{5.0, -3.0}});
  cc.ema_count[0] = 1.0;
  Tensor batch = Tensor::from({1, 2}, {0.5, 0.25});
  double prev = 1e300;
  for (int it = 0; it < 40; ++it) {
    ema_update(cc, batch, {0}, 0.5);
    const double d = std::hypot(cc.prototypes[0] - 0.5,
                                cc.prototypes[1] - 0.25);
    CHECK(d <= prev + 1e-15);
    prev = d;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("replace_dead: triggers exactly at stale_patience with a batch member") {
  Codebook cb = codebook_from({{100.0}, {0.0}});
  Tensor batch = Tensor::from({3, 1}, {1.0, 2.0, 3.0});
  Rng engine(99);

  // Prototype 0 never assigned; prototype 1 gets all three patches and its
  // usage estimate stays comfortably above the threshold.
  const int patience = 5;
  const double threshold = 1.5;
  for (int b = 1; b <= patience; ++b) {
    ema_update(cb, batch, {1, 1, 1}, 0.5);
    auto replaced = replace_dead(cb, batch, threshold, patience, engine);
    if (b < patience) {
      CHECK(replaced.empty());
      CHECK(cb.stale_batches[0] == b);
    } else {
      REQUIRE(replaced.size() == 1);
      CHECK(replaced[0] == 0);
      const double v = cb.prototypes[0];
      CHECK((v == 1.0 || v == 2.0 || v == 3.0));  // a current-batch member
      CHECK(cb.ema_count[0] == 1.0);
      CHECK(cb.stale_batches[0] == 0);
    }
    // The used prototype is never touched.
    CHECK(cb.stale_batches[1] == 0);
    CHECK(cb.prototypes[1] != 100.0);
  }
}

TEST_CASE("replace_dead: healthy usage resets the stale counter") {
  Codebook cb = codebook_from({{0.0}});
  Tensor batch = Tensor::from({2, 1}, {1.0, 2.0});
  Rng engine(1);
  cb.ema_count[0] = 0.0;
  replace_dead(cb, batch, 3.0, 3, engine);
  replace_dead(cb, batch, 3.0, 3, engine);
  CHECK(cb.stale_batches[0] == 2);
  cb.ema_count[0] = 10.0;  // healthy again
  replace_dead(cb, batch, 3.0, 3, engine);
  CHECK(cb.stale_batches[0] == 0);
  CHECK(cb.prototypes[0] == 0.0);
}

TEST_CASE("replace_dead: seeded rng reproduces the replacement choice") {
  TestRng rng(77);
  Tensor batch = rng.tensor({32, 3});
  auto run = [&](uint64_t seed) {
    Codebook cb = make_codebook(4, 3);
    for (auto& c : cb.ema_count) c = 0.0;
    for (auto& s : cb.stale_batches) s = 4;
    Rng engine(seed);
    replace_dead(cb, batch, 1.0, 5, engine);
    return cb.prototypes;
  };
  Tensor a = run(123);
  Tensor b = run(123);
  Tensor c = run(456);
  CHECK(std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.data(), c.data(), a.numel() * sizeof(double)) != 0);
}

TEST_CASE("hierarchy config: level sizes and flat aliasing") {
  HvqConfig cfg;
  cfg.k = 4;
  cfg.alpha = 2;

  cfg.levels = 1;
  CHECK(cfg.level_sizes() == std::vector<int64_t>{4});
  cfg.levels = 2;
  CHECK(cfg.level_sizes() == std::vector<int64_t>{8, 4});
  cfg.levels = 3;
  CHECK(cfg.level_sizes() == std::vector<int64_t>{16, 8, 4});
  CHECK(cfg.threshold_for_level(0) == 3.0);
  CHECK(cfg.threshold_for_level(2) == 1.0);

  cfg.levels = 4;
  CHECK_THROWS_AS(cfg.level_sizes(), ValidationError);
  cfg.levels = 1;

  // levels=1: top assignment is the (single) level-1 assignment.
  TestRng rng(3);
  Codebook cb = make_codebook(4, 3);
  for (int64_t i = 0; i < cb.prototypes.numel(); ++i)
    cb.prototypes[i] = rng.uniform(-1, 1);
  Tensor patches = rng.tensor({6, 3});
  Assignment a = quantize_hierarchy(patches, {cb});
  CHECK(a.top().indices == a.finest().indices);
}

TEST_CASE("codebook init: batch sampling without replacement, gaussian fallback") {
  TestRng trng(15);
  Tensor batch = trng.tensor({10, 3});
  Codebook cb = make_codebook(4, 3);
  Rng engine(5);
  init_codebook_from_batch(cb, batch, engine);
  std::set<int64_t> sources;
  for (int64_t j = 0; j < 4; ++j) {
    bool matched = false;
    for (int64_t r = 0; r < 10; ++r)
      if (std::memcmp(cb.prototypes.data() + j * 3, batch.data() + r * 3,
                      3 * sizeof(double)) == 0) {
        CHECK(sources.insert(r).second);  // without replacement
        matched = true;
        break;
      }
    CHECK(matched);
  }

  Codebook big = make_codebook(16, 3);
  init_codebook_from_batch(big, batch, engine);  // batch too small
  double norm = 0;
  for (int64_t i = 0; i < big.prototypes.numel(); ++i)
    norm = std::max(norm, std::fabs(big.prototypes[i]));
  CHECK(norm < 0.2);
  CHECK(norm > 0.0);
}

TEST_CASE("codebook serialization round-trips bit-exactly") {
  TestRng rng(21);
  Codebook cb = make_codebook(5, 7);
  for (int64_t i = 0; i < cb.prototypes.numel(); ++i) {
    cb.prototypes[i] = rng.uniform(-3, 3);
    cb.ema_sum[i] = rng.uniform(-3, 3);
  }
  for (auto& c : cb.ema_count) c = rng.uniform(0, 10);
  cb.stale_batches[2] = 4;

  io::ByteWriter w;
  serialize_codebook(w, cb);
  io::ByteReader r(w.buffer(), "test");
  Codebook back = deserialize_codebook(r);
  CHECK(r.at_end());
  CHECK(std::memcmp(back.prototypes.data(), cb.prototypes.data(),
                    cb.prototypes.numel() * sizeof(double)) == 0);
  CHECK(std::memcmp(back.ema_sum.data(), cb.ema_sum.data(),
                    cb.ema_sum.numel() * sizeof(double)) == 0);
  CHECK(back.ema_count == cb.ema_count);
  CHECK(back.stale_batches == cb.stale_batches);
}
