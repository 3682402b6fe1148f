#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "vqseg/dataset.hpp"
#include "vqseg/hvq.hpp"
#include "vqseg/losses.hpp"
#include "vqseg/model.hpp"
#include "vqseg/pipeline.hpp"
#include "vqseg/rng.hpp"

namespace vqseg {

struct TrainConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 100;
  int batch_size = 4;
  int64_t patch_size = 10;  // synthetic default; 60/50/30 for the mocap sets
  uint64_t seed = 1;
  LossWeights weights;
  HvqConfig hvq;  // hvq.k == 0 takes K from the manifest's k_gt
  EncoderConfig encoder;
  TemporalDecoderConfig temporal;
  Routing routing;

  void validate() const;
};

// Strict schema: unknown keys are rejected with the offending key named.
TrainConfig parse_train_config(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& cfg);

struct ModelState {
  TrainConfig config;  // resolved (hvq.k filled in)
  ModelDims dims;
  ModelParams params;
  ModelP<Tensor> adam_m;
  ModelP<Tensor> adam_v;
  std::vector<Codebook> books;
  bool books_initialized = false;
  int64_t step = 0;
  Rng rng;
};

ModelState init_state(const TrainConfig& cfg, int k_gt, int64_t joint_dim,
                      int64_t joint_count);

// Standard bias-corrected Adam over every model parameter.
void adam_update(ModelState& state, ModelP<Tensor>& grads);

// One optimizer step over a ragged batch: per-sequence forward/backward with
// gradient accumulation, Adam, then codebook EMA and dead-code replacement.
LossReport train_step(ModelState& state,
                      const std::vector<const SkeletonSequence*>& batch);

struct TrainOutcome {
  LossReport last;
  int64_t steps = 0;
};

// Full loop over the manifest's sequences. Appends one CSV row per step to
// `log` (header included) when non-null.
TrainOutcome train(ModelState& state, const DatasetManifest& manifest,
                   std::ostream* log);

// Checkpoint: magic "HVQ1", u32 version, checksummed sections
// (params, codebooks, optimizer, rng).
void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

constexpr const char* kLossCsvHeader = "step,commit_z,commit_a,spatial,temporal,total";
std::string loss_csv_row(int64_t step, const LossReport& report);

}  // namespace vqseg
