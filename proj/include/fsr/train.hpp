#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fsr/data.hpp"
#include "fsr/model.hpp"
#include "json.hpp"

namespace fsr::train {

using diff::Tape;
using diff::Tensor;
using diff::Var;

struct TrainConfig {
  double lr = 5e-4;
  double lr_decay_per_epoch = 0.98;
  std::size_t batch_size = 2048;
  double lambda_pos = 2048.0;
  std::size_t sinr_epochs = 20;
  std::size_t fsinr_epochs = 20;
  double sinr_dropout = 0.5;
  double fsinr_dropout = 0.2;
  std::size_t context_len = 20;
  double p_drop_locations = 0.2;
  double p_drop_text = 0.5;
  double p_drop_image = 0.5;
  std::size_t sinr_cap = 1000;
  std::size_t fsinr_cap = 100;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& c);
// Starts from `base` and overrides every key present in the flat object j.
// Throws Error(kDomainError) for unknown keys or invalid values.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
void validate(const TrainConfig& c);

inline constexpr double kProbFloor = 1e-8;

double lr_at_epoch(const TrainConfig& c, std::size_t epoch);

// -(1/s) Σ_j [1[z=j]·λ·log ŷ_j + 1[z≠j]·log(1−ŷ_j) + log(1−ŷ'_j)], with every
// probability clamped to [1e-8, 1 − 1e-8] inside the logs. Throws
// Error(kDomainError) for NaN or values outside [0, 1].
double loss_an_full(std::span<const double> yhat, std::size_t z,
                    std::span<const double> yhat_pseudo, double lambda);

// Mean over all entries of the same bracket, on a tape. probs and
// pseudo_probs share a shape; positive holds the 0/1 indicator.
template <typename T>
Var an_full_loss(Tape<T>& tape, Var probs, Var pseudo_probs, const Tensor<T>& positive,
                 T lambda);

// Within-batch loss. Row i of loc/pseudo holds f(x_i) and f(x'_i), row j of
// species_embeddings holds w_j; P_ij = σ(f(x_i)·w_j) and P'_ij = σ(f(x'_i)·w_j).
// Pair (i, j) is positive when species[i] == species[j].
template <typename T>
Var batch_loss(Tape<T>& tape, Var loc, Var pseudo, Var species_embeddings,
               std::span<const std::uint32_t> species, T lambda);

// Bias-corrected Adam (β1 = 0.9, β2 = 0.999, eps = 1e-8).
template <typename T>
class Adam {
 public:
  explicit Adam(model::ParamList<T> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  // Applies one update from each Parameter::grad. Throws
  // Error(kShapeMismatch) when a gradient does not match its parameter.
  void step(double lr);
  void zero_grad();
  std::size_t steps() const { return t_; }

 private:
  model::ParamList<T> params_;
  std::vector<Tensor<double>> m_;
  std::vector<Tensor<double>> v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct TrainingExample {
  std::uint32_t species_id = 0;
  geo::GeoPoint location;
  std::size_t record = 0;  // index into the observation store
};

// Up to `cap` examples per species, drawn without replacement, grouped by
// species in ascending id order.
std::vector<TrainingExample> capped_examples(const data::ObservationStore& store,
                                             std::size_t cap, std::mt19937_64& rng);

struct Modalities {
  const data::EmbeddingProvider* text = nullptr;
  const data::EmbeddingProvider* image = nullptr;
};

struct AssembledContext {
  model::ContextSet context;
  // Locations were dropped and every requested side modality is missing.
  bool skip = false;
};

// Draws up to cfg.context_len of the species' other observations without
// replacement, then drops locations, text and image independently.
AssembledContext assemble_context(const TrainingExample& ex, const data::ObservationStore& store,
                                  const Modalities& side, std::mt19937_64& rng,
                                  const TrainConfig& cfg);

struct BatchItem {
  std::uint32_t species_id = 0;
  geo::GeoPoint location;
  model::ContextSet context;
  // Drives dropout inside the species embedding; null disables it.
  std::optional<std::mt19937_64> dropout_rng;
};

// One FS-SINR step's loss over a batch. Each item's species embedding is
// computed on its own tape; the within-batch loss treats the stacked
// embeddings as leaves, and its gradient is pushed back through every
// example tape in order. With compute_grads the parameter gradients are added
// to Parameter::grad. `batch_rng` drives dropout in the location encoder for
// the batch and pseudo-absence points (null disables it).
template <typename T>
double fsinr_batch_step(model::FsSinrModel<T>& model, std::span<const BatchItem> items,
                        std::span<const geo::GeoPoint> pseudo, double lambda, double dropout,
                        std::mt19937_64* batch_rng, bool compute_grads);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  std::size_t examples = 0;
};
using EpochCallback = std::function<void(const EpochLog&)>;

// SINR stage: location encoder plus per-species classifier trained with the
// full assume-negative loss. Throws Error(kNoTrainingData) on an empty store.
template <typename T>
std::vector<EpochLog> pretrain_sinr(model::SinrModel<T>& model,
                                    const data::ObservationStore& store,
                                    const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// FS-SINR stage. The model's encoder starts from a copy of `pretrained`
// (only read). `store` must already exclude held-out species; the species
// that reached a batch are returned in `seen` for auditing. Throws
// Error(kNoTrainingData) on an empty store and Error(kMissingEncoder) when
// `pretrained` is null or shaped differently from the model's encoder.
template <typename T>
std::vector<EpochLog> train_fsinr(model::FsSinrModel<T>& model,
                                  model::LocationEncoder<T>* pretrained,
                                  const data::ObservationStore& store, const Modalities& side,
                                  const TrainConfig& cfg, std::vector<std::uint32_t>* seen = nullptr,
                                  const EpochCallback& on_epoch = {});

// Deterministic per-(seed, a, b, c) RNG stream.
std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                           std::uint64_t c = 0);

}  // namespace fsr::train
