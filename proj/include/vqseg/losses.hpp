#pragma once

#include <memory>
#include <vector>

#include "vqseg/graph.hpp"
#include "vqseg/tensor.hpp"

namespace vqseg {

struct LossWeights {
  double lambda_commit = 1.0;
  double lambda_spat = 0.001;
  double lambda_temp = 0.2;

  void validate() const;
};

// Per-batch loss terms; total = lambda_commit*(commit_z + commit_a)
// + lambda_spat*spatial + lambda_temp*temporal.
struct LossReport {
  double commit_z = 0.0;
  double commit_a = 0.0;
  double spatial = 0.0;
  double temporal = 0.0;
  double total = 0.0;

  LossReport& operator+=(const LossReport& o);
};

double weighted_total(const LossReport& parts, const LossWeights& w);

// --- graph builders ------------------------------------------------------

// Sum over patches of the squared distance to the (gradient-frozen)
// quantized side; mask excludes padded frame positions.
ad::Var commitment_loss(ad::Graph& g, ad::Var input, const Tensor& quantized,
                        std::shared_ptr<const Tensor> mask);

ad::Var spatial_recon_loss(ad::Graph& g, ad::Var shat, const Tensor& s,
                           std::vector<uint8_t> frame_mask = {});

ad::Var temporal_recon_loss(ad::Graph& g, ad::Var that, const Tensor& timestamps);

ad::Var total_loss(ad::Graph& g, ad::Var commit_z, ad::Var commit_a,
                   ad::Var spatial, ad::Var temporal, const LossWeights& w);

// --- direct evaluation (no gradients) ------------------------------------

double commitment(const Tensor& input, const Tensor& quantized,
                  const Tensor* mask = nullptr);
double spatial_recon(const Tensor& s, const Tensor& shat,
                     std::vector<uint8_t> frame_mask = {});
double temporal_recon(const Tensor& t, const Tensor& that);

}  // namespace vqseg
