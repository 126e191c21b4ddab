#include "fsr/pipeline.hpp"

namespace fsr::pipeline {

model::ModelConfig benchmark_model_config() {
  model::ModelConfig c;
  c.embed_dim = 64;
  c.ffn_dim = 128;
  c.adapter_hidden = 128;
  c.decoder_hidden = 64;
  return c;
}

train::TrainConfig benchmark_train_config(std::uint64_t seed) {
  train::TrainConfig c;
  c.batch_size = 64;
  c.lambda_pos = 64;
  c.lr = 1e-3;
  c.seed = seed;
  return c;
}

TrainedModels train_on_world(const data::SyntheticWorld& world, const model::ModelConfig& mc,
                             const train::TrainConfig& cfg, const data::EmbeddingProvider* text,
                             const Progress& progress) {
  const auto ids = world.train_ids();
  const auto store = world.observations.subset(ids);
  TrainedModels out{model::SinrModel<float>(mc, ids, train::derive_rng(cfg.seed, 20)()),
                    model::FsSinrModel<float>(mc, train::derive_rng(cfg.seed, 21)()),
                    {},
                    {}};
  auto report = [&](const char* stage) {
    return [&progress, stage](const train::EpochLog& log) {
      if (progress) progress(stage, log);
    };
  };
  out.sinr_log = train::pretrain_sinr(out.sinr, store, cfg, report("sinr"));
  out.fsinr_log = train::train_fsinr(out.fsinr, &out.sinr.encoder, store, {text, nullptr}, cfg,
                                     nullptr, report("fsinr"));
  return out;
}

eval::EvalData heldout_eval_data(const data::SyntheticWorld& world,
                                 const data::EmbeddingProvider* text) {
  eval::EvalData d;
  for (const auto id : world.holdout_ids()) d.masks[id] = world.masks.at(id);
  d.observations = &world.observations;
  d.text = text;
  for (const auto id : world.train_ids()) {
    for (const auto r : world.observations.indices_of(id)) {
      d.train_locations.push_back(world.observations[r].location);
    }
  }
  return d;
}

}  // namespace fsr::pipeline
