#include "vqseg/losses.hpp"

#include "vqseg/errors.hpp"

namespace vqseg {

void LossWeights::validate() const {
  if (lambda_commit < 0 || lambda_spat < 0 || lambda_temp < 0)
    throw ValidationError("loss weights must be >= 0");
}

LossReport& LossReport::operator+=(const LossReport& o) {
  commit_z += o.commit_z;
  commit_a += o.commit_a;
  spatial += o.spatial;
  temporal += o.temporal;
  total += o.total;
  return *this;
}

double weighted_total(const LossReport& parts, const LossWeights& w) {
  return w.lambda_commit * (parts.commit_z + parts.commit_a) +
         w.lambda_spat * parts.spatial + w.lambda_temp * parts.temporal;
}

ad::Var commitment_loss(ad::Graph& g, ad::Var input, const Tensor& quantized,
                        std::shared_ptr<const Tensor> mask) {
  return g.masked_sqdiff_sum(input, g.constant(quantized), std::move(mask));
}

ad::Var spatial_recon_loss(ad::Graph& g, ad::Var shat, const Tensor& s,
                           std::vector<uint8_t> frame_mask) {
  return g.spatial_recon(shat, std::make_shared<const Tensor>(s),
                         std::move(frame_mask));
}

ad::Var temporal_recon_loss(ad::Graph& g, ad::Var that, const Tensor& timestamps) {
  return g.mse(that, g.constant(timestamps));
}

ad::Var total_loss(ad::Graph& g, ad::Var commit_z, ad::Var commit_a,
                   ad::Var spatial, ad::Var temporal, const LossWeights& w) {
  w.validate();
  ad::Var commit = g.add(commit_z, commit_a);
  ad::Var acc = g.scale(commit, w.lambda_commit);
  acc = g.add(acc, g.scale(spatial, w.lambda_spat));
  return g.add(acc, g.scale(temporal, w.lambda_temp));
}

double commitment(const Tensor& input, const Tensor& quantized,
                  const Tensor* mask) {
  ad::Graph g(false);
  auto m = mask ? std::make_shared<const Tensor>(*mask)
                : std::shared_ptr<const Tensor>{};
  return g.value(g.masked_sqdiff_sum(g.constant(input), g.constant(quantized), m))[0];
}

double spatial_recon(const Tensor& s, const Tensor& shat,
                     std::vector<uint8_t> frame_mask) {
  ad::Graph g(false);
  return g.value(g.spatial_recon(g.constant(shat), std::make_shared<const Tensor>(s),
                                 std::move(frame_mask)))[0];
}

double temporal_recon(const Tensor& t, const Tensor& that) {
  ad::Graph g(false);
  return g.value(g.mse(g.constant(that), g.constant(t)))[0];
}

}  // namespace vqseg
