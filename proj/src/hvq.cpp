#include "vqseg/hvq.hpp"

#include <algorithm>

#include "vqseg/errors.hpp"
#include "vqseg/kernels.hpp"

namespace vqseg {

Codebook make_codebook(int64_t size, int64_t dim) {
  if (size < 1) throw ValidationError("codebook size must be >= 1");
  Codebook cb;
  cb.prototypes = Tensor::zeros({size, dim});
  cb.ema_sum = Tensor::zeros({size, dim});
  cb.ema_count.assign(static_cast<std::size_t>(size), 1.0);
  cb.stale_batches.assign(static_cast<std::size_t>(size), 0);
  return cb;
}

void HvqConfig::validate() const {
  if (k < 1) throw ValidationError("hvq: k must be >= 1");
  if (alpha < 1) throw ValidationError("hvq: alpha must be >= 1");
  if (!(beta > 0.0 && beta < 1.0))
    throw ValidationError("hvq: beta must be in (0,1)");
  if (levels < 1 || levels > 3)
    throw ValidationError("hvq: levels must be 1, 2 or 3");
  if (stale_patience < 1) throw ValidationError("hvq: stale_patience must be >= 1");
}

std::vector<int64_t> HvqConfig::level_sizes() const {
  validate();
  std::vector<int64_t> sizes;
  for (int l = levels - 1; l >= 0; --l) {
    int64_t s = k;
    for (int i = 0; i < l; ++i) s *= alpha;
    sizes.push_back(s);
  }
  return sizes;  // finest first
}

double HvqConfig::threshold_for_level(std::size_t level) const {
  // Top level uses nu_a; every finer level uses nu_z.
  return level + 1 == static_cast<std::size_t>(levels) ? nu_a : nu_z;
}

LevelAssignment quantize_against(const Tensor& inputs, const Codebook& cb) {
  if (cb.size() < 1) throw ValidationError("quantize against empty codebook");
  if (inputs.shape().size() != 2 || inputs.dim(1) != cb.dim())
    throw DimensionError("quantize input dim " +
                         std::to_string(inputs.shape().size() == 2 ? inputs.dim(1) : -1) +
                         " does not match prototype dim " +
                         std::to_string(cb.dim()));
  const int64_t rows = inputs.dim(0);
  const int64_t dim = cb.dim();
  const int64_t size = cb.size();

  LevelAssignment out;
  out.indices.resize(static_cast<std::size_t>(rows));
  out.quantized = Tensor::zeros({rows, dim});

  std::vector<double> dist(static_cast<std::size_t>(size));
  const auto& kr = kernels::active();
  for (int64_t r = 0; r < rows; ++r) {
    kr.l2_distances(dist.data(), inputs.data() + r * dim,
                    cb.prototypes.data(), static_cast<std::size_t>(size),
                    static_cast<std::size_t>(dim));
    int64_t best = 0;
    for (int64_t j = 1; j < size; ++j)
      if (dist[static_cast<std::size_t>(j)] < dist[static_cast<std::size_t>(best)])
        best = j;
    out.indices[static_cast<std::size_t>(r)] = static_cast<int32_t>(best);
    std::copy_n(cb.prototypes.data() + best * dim, dim,
                out.quantized.data() + r * dim);
  }
  return out;
}

Assignment quantize_hierarchy(const Tensor& patches,
                              const std::vector<Codebook>& books) {
  if (books.empty()) throw ValidationError("quantize_hierarchy with no codebooks");
  Assignment a;
  const Tensor* level_input = &patches;
  for (const Codebook& cb : books) {
    a.levels.push_back(quantize_against(*level_input, cb));
    level_input = &a.levels.back().quantized;
  }
  return a;
}

void ema_update(Codebook& cb, const Tensor& inputs,
                const std::vector<int32_t>& assigned, double beta) {
  if (inputs.shape().size() != 2 || inputs.dim(1) != cb.dim())
    throw DimensionError("ema_update input dim mismatch");
  if (static_cast<int64_t>(assigned.size()) != inputs.dim(0))
    throw DimensionError("ema_update assignment count mismatch");
  const int64_t size = cb.size();
  const int64_t dim = cb.dim();

  Tensor sums = Tensor::zeros({size, dim});
  std::vector<double> counts(static_cast<std::size_t>(size), 0.0);
  const auto& kr = kernels::active();
  for (int64_t r = 0; r < inputs.dim(0); ++r) {
    const int32_t j = assigned[static_cast<std::size_t>(r)];
    if (j < 0 || j >= size) throw ValidationError("ema_update index out of range");
    counts[static_cast<std::size_t>(j)] += 1.0;
    kr.accumulate(sums.data() + static_cast<int64_t>(j) * dim,
                  inputs.data() + r * dim, static_cast<std::size_t>(dim));
  }

  for (int64_t j = 0; j < size; ++j) {
    const double nhat = beta * cb.ema_count[static_cast<std::size_t>(j)] +
                        (1.0 - beta) * counts[static_cast<std::size_t>(j)];
    cb.ema_count[static_cast<std::size_t>(j)] = nhat;
    double* proto = cb.prototypes.data() + j * dim;
    double* num = cb.ema_sum.data() + j * dim;
    const double* sum = sums.data() + j * dim;
    for (int64_t d = 0; d < dim; ++d)
      num[d] = beta * proto[d] + (1.0 - beta) * sum[d];
    if (nhat < 1e-8) continue;  // guarded division; prototype stays put
    kr.ema_combine(proto, sum, beta, nhat, static_cast<std::size_t>(dim));
  }
}

std::vector<int64_t> replace_dead(Codebook& cb, const Tensor& batch_inputs,
                                  double threshold, int stale_patience,
                                  Rng& rng) {
  if (batch_inputs.shape().size() != 2 || batch_inputs.dim(0) < 1)
    throw ValidationError("replace_dead requires a nonempty batch");
  if (batch_inputs.dim(1) != cb.dim())
    throw DimensionError("replace_dead input dim mismatch");
  const int64_t dim = cb.dim();
  std::vector<int64_t> replaced;
  for (int64_t j = 0; j < cb.size(); ++j) {
    auto& stale = cb.stale_batches[static_cast<std::size_t>(j)];
    if (cb.ema_count[static_cast<std::size_t>(j)] < threshold) {
      ++stale;
    } else {
      stale = 0;
      continue;
    }
    if (stale < stale_patience) continue;
    const int64_t pick = rng.below(batch_inputs.dim(0));
    std::copy_n(batch_inputs.data() + pick * dim, dim,
                cb.prototypes.data() + j * dim);
    std::copy_n(batch_inputs.data() + pick * dim, dim,
                cb.ema_sum.data() + j * dim);
    cb.ema_count[static_cast<std::size_t>(j)] = 1.0;
    stale = 0;
    replaced.push_back(j);
  }
  return replaced;
}

void init_codebook_from_batch(Codebook& cb, const Tensor& batch_inputs, Rng& rng) {
  const int64_t size = cb.size();
  const int64_t dim = cb.dim();
  const int64_t rows = batch_inputs.shape().size() == 2 ? batch_inputs.dim(0) : 0;
  if (rows >= size) {
    if (batch_inputs.dim(1) != dim)
      throw DimensionError("codebook init input dim mismatch");
    // Partial Fisher-Yates draw of `size` distinct rows.
    std::vector<int64_t> pool(static_cast<std::size_t>(rows));
    for (int64_t i = 0; i < rows; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int64_t j = 0; j < size; ++j) {
      const int64_t swap = j + rng.below(rows - j);
      std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(swap)]);
      std::copy_n(batch_inputs.data() + pool[static_cast<std::size_t>(j)] * dim,
                  dim, cb.prototypes.data() + j * dim);
    }
  } else {
    for (int64_t i = 0; i < cb.prototypes.numel(); ++i)
      cb.prototypes[i] = rng.normal(0.0, 0.02);
  }
  cb.ema_sum = cb.prototypes;
  cb.ema_count.assign(static_cast<std::size_t>(size), 1.0);
  cb.stale_batches.assign(static_cast<std::size_t>(size), 0);
}

std::vector<Codebook> make_hierarchy(const HvqConfig& cfg, int64_t patch_dim) {
  std::vector<Codebook> books;
  for (int64_t size : cfg.level_sizes()) books.push_back(make_codebook(size, patch_dim));
  return books;
}

void serialize_codebook(io::ByteWriter& w, const Codebook& cb) {
  w.u64(static_cast<uint64_t>(cb.size()));
  w.u64(static_cast<uint64_t>(cb.dim()));
  for (int64_t i = 0; i < cb.prototypes.numel(); ++i) w.f64(cb.prototypes[i]);
  for (double c : cb.ema_count) w.f64(c);
  for (int64_t i = 0; i < cb.ema_sum.numel(); ++i) w.f64(cb.ema_sum[i]);
  for (int32_t s : cb.stale_batches) w.u32(static_cast<uint32_t>(s));
}

Codebook deserialize_codebook(io::ByteReader& r) {
  const int64_t size = static_cast<int64_t>(r.u64());
  const int64_t dim = static_cast<int64_t>(r.u64());
  if (size < 1 || dim < 1) throw ParseError("codebook: invalid dimensions");
  Codebook cb = make_codebook(size, dim);
  for (int64_t i = 0; i < cb.prototypes.numel(); ++i) cb.prototypes[i] = r.f64();
  for (auto& c : cb.ema_count) c = r.f64();
  for (int64_t i = 0; i < cb.ema_sum.numel(); ++i) cb.ema_sum[i] = r.f64();
  for (auto& s : cb.stale_batches) s = static_cast<int32_t>(r.u32());
  return cb;
}

}  // namespace vqseg
