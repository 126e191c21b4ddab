#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fsr/evaluate.hpp"
#include "fsr/synth.hpp"
#include "fsr/train.hpp"

namespace fsr::pipeline {

// Reduced-width model and schedule that fit the synthetic benchmark on one
// CPU core. The full-size defaults live in ModelConfig/TrainConfig.
model::ModelConfig benchmark_model_config();
train::TrainConfig benchmark_train_config(std::uint64_t seed);

struct TrainedModels {
  model::SinrModel<float> sinr;
  model::FsSinrModel<float> fsinr;
  std::vector<train::EpochLog> sinr_log;
  std::vector<train::EpochLog> fsinr_log;
};

using Progress = std::function<void(const std::string& stage, const train::EpochLog&)>;

// SINR pretraining followed by FS-SINR training, both on the world's
// training species only. Model initialisation is seeded from cfg.seed.
TrainedModels train_on_world(const data::SyntheticWorld& world, const model::ModelConfig& mc,
                             const train::TrainConfig& cfg, const data::EmbeddingProvider* text,
                             const Progress& progress = {});

// Held-out masks with the full observation store as the context source and
// the training species' locations as the pseudo-negative pool.
eval::EvalData heldout_eval_data(const data::SyntheticWorld& world,
                                 const data::EmbeddingProvider* text);

}  // namespace fsr::pipeline
