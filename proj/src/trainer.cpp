#include "vqseg/trainer.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "vqseg/errors.hpp"
#include "vqseg/io.hpp"
#include "vqseg/kernels.hpp"

namespace vqseg {

void TrainConfig::validate() const {
  if (lr <= 0) throw ValidationError("config: lr must be > 0");
  if (epochs < 1) throw ValidationError("config: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
  if (patch_size < 1) throw ValidationError("config: patch_size must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ValidationError("config: adam betas must be in [0,1)");
  if (epsilon <= 0) throw ValidationError("config: epsilon must be > 0");
  weights.validate();
  encoder.validate();
  temporal.validate();
}

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& scope) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw ValidationError("config: unknown key '" +
                            (scope.empty() ? key : scope + "." + key) + "'");
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).template get<T>();
}

}  // namespace

TrainConfig parse_train_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config: top level must be an object");

  TrainConfig cfg;
  try {
    reject_unknown(j, {"lr", "beta1", "beta2", "epsilon", "epochs",
                       "batch_size", "patch_size", "seed", "lambda_commit",
                       "lambda_spat", "lambda_temp", "hvq", "encoder",
                       "temporal_decoder", "spatial_input", "temporal_input"},
                   "");
    read_if(j, "lr", cfg.lr);
    read_if(j, "beta1", cfg.beta1);
    read_if(j, "beta2", cfg.beta2);
    read_if(j, "epsilon", cfg.epsilon);
    read_if(j, "epochs", cfg.epochs);
    read_if(j, "batch_size", cfg.batch_size);
    read_if(j, "patch_size", cfg.patch_size);
    read_if(j, "seed", cfg.seed);
    read_if(j, "lambda_commit", cfg.weights.lambda_commit);
    read_if(j, "lambda_spat", cfg.weights.lambda_spat);
    read_if(j, "lambda_temp", cfg.weights.lambda_temp);
    if (j.contains("hvq")) {
      const json& h = j.at("hvq");
      reject_unknown(h, {"k", "alpha", "beta", "nu_z", "nu_a",
                         "stale_patience", "levels"},
                     "hvq");
      read_if(h, "k", cfg.hvq.k);
      read_if(h, "alpha", cfg.hvq.alpha);
      read_if(h, "beta", cfg.hvq.beta);
      read_if(h, "nu_z", cfg.hvq.nu_z);
      read_if(h, "nu_a", cfg.hvq.nu_a);
      read_if(h, "stale_patience", cfg.hvq.stale_patience);
      read_if(h, "levels", cfg.hvq.levels);
    }
    if (j.contains("encoder")) {
      const json& e = j.at("encoder");
      reject_unknown(e, {"stages", "layers_per_stage", "hidden", "latent",
                         "kernel", "dropout"},
                     "encoder");
      read_if(e, "stages", cfg.encoder.stages);
      read_if(e, "layers_per_stage", cfg.encoder.layers_per_stage);
      read_if(e, "hidden", cfg.encoder.hidden);
      read_if(e, "latent", cfg.encoder.latent);
      read_if(e, "kernel", cfg.encoder.kernel);
      read_if(e, "dropout", cfg.encoder.dropout);
    }
    if (j.contains("temporal_decoder")) {
      const json& t = j.at("temporal_decoder");
      reject_unknown(t, {"hidden"}, "temporal_decoder");
      read_if(t, "hidden", cfg.temporal.hidden);
    }
    if (j.contains("spatial_input"))
      cfg.routing.spatial =
          parse_routing_source(j.at("spatial_input").get<std::string>());
    if (j.contains("temporal_input"))
      cfg.routing.temporal =
          parse_routing_source(j.at("temporal_input").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["lr"] = cfg.lr;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["epsilon"] = cfg.epsilon;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["patch_size"] = cfg.patch_size;
  j["seed"] = cfg.seed;
  j["lambda_commit"] = cfg.weights.lambda_commit;
  j["lambda_spat"] = cfg.weights.lambda_spat;
  j["lambda_temp"] = cfg.weights.lambda_temp;
  j["hvq"] = {{"k", cfg.hvq.k},
              {"alpha", cfg.hvq.alpha},
              {"beta", cfg.hvq.beta},
              {"nu_z", cfg.hvq.nu_z},
              {"nu_a", cfg.hvq.nu_a},
              {"stale_patience", cfg.hvq.stale_patience},
              {"levels", cfg.hvq.levels}};
  j["encoder"] = {{"stages", cfg.encoder.stages},
                  {"layers_per_stage", cfg.encoder.layers_per_stage},
                  {"hidden", cfg.encoder.hidden},
                  {"latent", cfg.encoder.latent},
                  {"kernel", cfg.encoder.kernel},
                  {"dropout", cfg.encoder.dropout}};
  j["temporal_decoder"] = {{"hidden", cfg.temporal.hidden}};
  j["spatial_input"] = routing_source_name(cfg.routing.spatial);
  j["temporal_input"] = routing_source_name(cfg.routing.temporal);
  return j.dump();
}

ModelState init_state(const TrainConfig& cfg, int k_gt, int64_t joint_dim,
                      int64_t joint_count) {
  TrainConfig resolved = cfg;
  if (resolved.hvq.k == 0) resolved.hvq.k = k_gt;
  resolved.validate();
  resolved.hvq.validate();

  ModelState state;
  state.config = resolved;
  state.dims.joint_dim = joint_dim;
  state.dims.joint_count = joint_count;
  state.dims.patch_size = resolved.patch_size;
  state.dims.encoder = resolved.encoder;
  state.dims.temporal = resolved.temporal;
  state.rng = Rng(resolved.seed);
  state.params = init_model(state.dims, state.rng);
  state.adam_m = map_params<Tensor>(state.params, [](const Tensor& t) {
    return Tensor::zeros(t.shape());
  });
  state.adam_v = map_params<Tensor>(state.params, [](const Tensor& t) {
    return Tensor::zeros(t.shape());
  });
  state.books = make_hierarchy(resolved.hvq, state.dims.patch_feature_dim());
  return state;
}

void adam_update(ModelState& state, ModelP<Tensor>& grads) {
  state.step += 1;
  const TrainConfig& c = state.config;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));

  std::vector<Tensor*> ps, ms, vs, gs;
  for_each_param(state.params, [&](Tensor& t) { ps.push_back(&t); });
  for_each_param(state.adam_m, [&](Tensor& t) { ms.push_back(&t); });
  for_each_param(state.adam_v, [&](Tensor& t) { vs.push_back(&t); });
  for_each_param(grads, [&](Tensor& t) { gs.push_back(&t); });

  const auto& kr = kernels::active();
  for (std::size_t i = 0; i < ps.size(); ++i)
    kr.adam_step(ps[i]->data(), ms[i]->data(), vs[i]->data(), gs[i]->data(),
                 static_cast<std::size_t>(ps[i]->numel()), c.lr, c.beta1,
                 c.beta2, c.epsilon, bias1, bias2);
}

namespace {

// Per-level pools gathered over a batch: inputs fed to that level and the
// prototype index each row chose.
struct LevelPool {
  std::vector<Tensor> chunks;
  std::vector<int32_t> indices;
  int64_t rows = 0;

  Tensor concat(int64_t dim) const {
    Tensor out = Tensor::zeros({rows, dim});
    int64_t off = 0;
    for (const Tensor& c : chunks) {
      std::copy_n(c.data(), c.numel(), out.data() + off);
      off += c.numel();
    }
    return out;
  }
};

void maybe_init_books(ModelState& state,
                      const std::vector<const SkeletonSequence*>& batch) {
  if (state.books_initialized) return;
  std::vector<Tensor> chunks;
  int64_t rows = 0;
  for (const SkeletonSequence* seq : batch) {
    Tensor patches = embed_patches(state.params, state.dims, seq->joints);
    rows += patches.dim(0);
    chunks.push_back(std::move(patches));
  }
  Tensor pool = Tensor::zeros({rows, state.dims.patch_feature_dim()});
  int64_t off = 0;
  for (const Tensor& c : chunks) {
    std::copy_n(c.data(), c.numel(), pool.data() + off);
    off += c.numel();
  }
  for (Codebook& cb : state.books)
    init_codebook_from_batch(cb, pool, state.rng);
  state.books_initialized = true;
}

}  // namespace

LossReport train_step(ModelState& state,
                      const std::vector<const SkeletonSequence*>& batch) {
  if (batch.empty()) throw ValidationError("train_step: empty batch");
  maybe_init_books(state, batch);

  ModelP<Tensor> grads = map_params<Tensor>(state.params, [](const Tensor& t) {
    return Tensor::zeros(t.shape());
  });

  const std::size_t levels = state.books.size();
  std::vector<LevelPool> pools(levels);
  LossReport report;

  for (const SkeletonSequence* seq : batch) {
    ad::Graph g;
    ModelVars vars = bind_params(g, state.params);
    SeqForward fwd = forward_sequence(g, vars, state.dims, state.books,
                                      seq->joints, state.config.routing);
    SeqLosses losses = build_losses(g, fwd, seq->joints, state.config.weights);
    if (!std::isfinite(losses.report.total)) {
      std::ostringstream os;
      os << "NaN/Inf loss at step " << state.step + 1 << " on sequence '"
         << seq->id << "': commit_z=" << losses.report.commit_z
         << " commit_a=" << losses.report.commit_a
         << " spatial=" << losses.report.spatial
         << " temporal=" << losses.report.temporal;
      throw NumericError(os.str());
    }
    g.backward(losses.total);

    // Accumulate parameter gradients across the ragged batch.
    zip_params(grads, vars, [&g](Tensor& dst, ad::Var& v) {
      const Tensor gv = g.grad(v);
      kernels::active().accumulate(dst.data(), gv.data(),
                                   static_cast<std::size_t>(gv.numel()));
    });

    // Pool quantizer traffic for the post-step EMA updates.
    const Tensor& patch_values = g.value(fwd.patches);
    for (std::size_t l = 0; l < levels; ++l) {
      const Tensor& inputs =
          l == 0 ? patch_values : fwd.assignment.levels[l - 1].quantized;
      pools[l].chunks.push_back(inputs);
      pools[l].rows += inputs.dim(0);
      const auto& idx = fwd.assignment.levels[l].indices;
      pools[l].indices.insert(pools[l].indices.end(), idx.begin(), idx.end());
    }
    report += losses.report;
  }

  adam_update(state, grads);

  const int64_t dim = state.dims.patch_feature_dim();
  for (std::size_t l = 0; l < levels; ++l) {
    Tensor inputs = pools[l].concat(dim);
    ema_update(state.books[l], inputs, pools[l].indices, state.config.hvq.beta);
    replace_dead(state.books[l], inputs,
                 state.config.hvq.threshold_for_level(l),
                 state.config.hvq.stale_patience, state.rng);
  }
  return report;
}

std::string loss_csv_row(int64_t step, const LossReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << step << ',' << r.commit_z << ',' << r.commit_a << ',' << r.spatial
     << ',' << r.temporal << ',' << r.total;
  return os.str();
}

TrainOutcome train(ModelState& state, const DatasetManifest& manifest,
                   std::ostream* log) {
  if (manifest.items.empty())
    throw ValidationError("train: manifest has no sequences");
  std::vector<SkeletonSequence> sequences;
  sequences.reserve(manifest.items.size());
  for (std::size_t i = 0; i < manifest.items.size(); ++i)
    sequences.push_back(load_sequence(manifest, i));

  if (log) *log << kLossCsvHeader << '\n';

  TrainOutcome outcome;
  std::vector<std::size_t> order(sequences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < state.config.epochs; ++epoch) {
    // Deterministic shuffle from the training rng.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(state.rng.below(static_cast<int64_t>(i)));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t at = 0; at < order.size();
         at += static_cast<std::size_t>(state.config.batch_size)) {
      std::vector<const SkeletonSequence*> batch;
      for (std::size_t b = at;
           b < order.size() &&
           b < at + static_cast<std::size_t>(state.config.batch_size);
           ++b)
        batch.push_back(&sequences[order[b]]);
      outcome.last = train_step(state, batch);
      outcome.steps = state.step;
      if (log) *log << loss_csv_row(state.step, outcome.last) << '\n';
    }
  }
  return outcome;
}

// --- checkpointing -------------------------------------------------------

namespace {

constexpr char kCkptMagic[4] = {'H', 'V', 'Q', '1'};
constexpr uint32_t kCkptVersion = 1;

void write_section(io::ByteWriter& file, const std::string& payload) {
  file.u64(payload.size());
  file.bytes(payload.data(), payload.size());
  file.u32(io::crc32(payload.data(), payload.size()));
}

std::string read_section(io::ByteReader& file, const char* name) {
  const uint64_t len = file.u64();
  if (file.remaining() < len + 4)
    throw ParseError(std::string("checkpoint: section '") + name +
                     "' truncated, checksum verification failed");
  std::string payload(file.raw(len));
  const uint32_t want = file.u32();
  const uint32_t got = io::crc32(payload.data(), payload.size());
  if (want != got)
    throw ParseError(std::string("checkpoint: checksum mismatch in section '") +
                     name + "'");
  return payload;
}

void write_tensors(io::ByteWriter& w, ModelP<Tensor>& model) {
  int64_t count = 0;
  for_each_param(model, [&count](Tensor&) { ++count; });
  w.u64(static_cast<uint64_t>(count));
  for_each_param(model, [&w](Tensor& t) {
    w.u64(static_cast<uint64_t>(t.numel()));
    w.bytes(t.data(), static_cast<std::size_t>(t.numel()) * sizeof(double));
  });
}

void read_tensors(io::ByteReader& r, ModelP<Tensor>& model) {
  int64_t count = 0;
  for_each_param(model, [&count](Tensor&) { ++count; });
  if (r.u64() != static_cast<uint64_t>(count))
    throw ParseError("checkpoint: parameter count mismatch");
  for_each_param(model, [&r](Tensor& t) {
    if (r.u64() != static_cast<uint64_t>(t.numel()))
      throw ParseError("checkpoint: parameter size mismatch");
    r.bytes(t.data(), static_cast<std::size_t>(t.numel()) * sizeof(double));
  });
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
  io::ByteWriter file;
  file.bytes(kCkptMagic, 4);
  file.u32(kCkptVersion);

  {
    io::ByteWriter params;
    params.str(train_config_to_json(state.config));
    params.u64(static_cast<uint64_t>(state.dims.joint_dim));
    params.u64(static_cast<uint64_t>(state.dims.joint_count));
    write_tensors(params, const_cast<ModelParams&>(state.params));
    write_section(file, params.take());
  }
  {
    io::ByteWriter books;
    books.u64(state.books.size());
    for (const Codebook& cb : state.books) serialize_codebook(books, cb);
    books.u32(state.books_initialized ? 1 : 0);
    write_section(file, books.take());
  }
  {
    io::ByteWriter opt;
    opt.u64(static_cast<uint64_t>(state.step));
    write_tensors(opt, const_cast<ModelP<Tensor>&>(state.adam_m));
    write_tensors(opt, const_cast<ModelP<Tensor>&>(state.adam_v));
    write_section(file, opt.take());
  }
  {
    io::ByteWriter rngw;
    rngw.str(state.rng.save());
    write_section(file, rngw.take());
  }
  io::write_file(path, file.buffer());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  const std::string data = io::read_file(path);
  io::ByteReader file(data, "checkpoint " + path.string());
  char magic[4];
  file.bytes(magic, 4);
  if (std::memcmp(magic, kCkptMagic, 4) != 0)
    throw ParseError("checkpoint: bad magic, expected HVQ1");
  const uint32_t version = file.u32();
  if (version != kCkptVersion)
    throw ParseError("checkpoint: unsupported version " +
                     std::to_string(version) + " (expected " +
                     std::to_string(kCkptVersion) + ")");

  const std::string params_payload = read_section(file, "params");
  io::ByteReader params(params_payload, "checkpoint params");
  const TrainConfig cfg = parse_train_config(params.str());
  const int64_t joint_dim = static_cast<int64_t>(params.u64());
  const int64_t joint_count = static_cast<int64_t>(params.u64());
  ModelState state = init_state(cfg, cfg.hvq.k, joint_dim, joint_count);
  read_tensors(params, state.params);

  const std::string books_payload = read_section(file, "codebooks");
  io::ByteReader books(books_payload, "checkpoint codebooks");
  const uint64_t book_count = books.u64();
  state.books.clear();
  for (uint64_t i = 0; i < book_count; ++i)
    state.books.push_back(deserialize_codebook(books));
  state.books_initialized = books.u32() != 0;

  const std::string opt_payload = read_section(file, "optimizer");
  io::ByteReader opt(opt_payload, "checkpoint optimizer");
  state.step = static_cast<int64_t>(opt.u64());
  read_tensors(opt, state.adam_m);
  read_tensors(opt, state.adam_v);

  const std::string rng_payload = read_section(file, "rng");
  io::ByteReader rngr(rng_payload, "checkpoint rng");
  state.rng.restore(rngr.str());

  if (!file.at_end()) throw ParseError("checkpoint: trailing bytes");
  return state;
}

}  // namespace vqseg
