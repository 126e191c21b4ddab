#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fsr/geo.hpp"
#include "fsr/model.hpp"

namespace fsr::fewshot {

using diff::Tensor;
using model::SpeciesEmbedding;

// Location embeddings for every cell center of a grid, computed once and
// then shared read-only.
class CellCache {
 public:
  CellCache(model::LocationEncoder<float>& encoder, const geo::GridSpec& grid);

  const geo::GridSpec& grid() const { return grid_; }
  const Tensor<float>& features() const { return features_; }
  std::size_t size() const { return features_.rows(); }
  std::span<const float> row(std::size_t cell) const;

 private:
  geo::GridSpec grid_;
  Tensor<float> features_;
};

// Presence probability of every cached cell for one species embedding.
geo::PredictionGrid score_grid(const SpeciesEmbedding& w, const CellCache& cells);

// One species-embedding pass followed by scoring against the cache; the
// model is only read. `cells` must come from the model's own encoder.
geo::PredictionGrid feedforward_range(model::FsSinrModel<float>& model,
                                      const model::ContextSet& ctx, const CellCache& cells);

// `n_uniform` points uniform on the sphere followed by `n_target` points
// drawn with replacement from `pool` (skipped when the pool is empty).
std::vector<geo::GeoPoint> pseudo_negatives(std::size_t n_uniform, std::size_t n_target,
                                            std::span<const geo::GeoPoint> pool,
                                            std::mt19937_64& rng);

// Mean location embeddings of the presence and absence support sets.
struct PrototypePair {
  std::vector<double> present;
  std::vector<double> absent;
};

// Throws Error(kEmptySupport) when either support set is empty.
PrototypePair build_prototypes(std::span<const geo::GeoPoint> presences,
                               std::span<const geo::GeoPoint> negatives,
                               model::LocationEncoder<float>& encoder);
// Two-way softmax over the cosine similarities to each prototype.
double prototype_probability(const PrototypePair& protos, std::span<const float> feature);
double prototype_predict(std::span<const geo::GeoPoint> presences,
                         std::span<const geo::GeoPoint> negatives, const geo::GeoPoint& x,
                         model::LocationEncoder<float>& encoder);
geo::PredictionGrid prototype_range(const PrototypePair& protos, const CellCache& cells);

struct ActiveResult {
  SpeciesEmbedding embedding;
  std::vector<double> weights;  // one per classifier column, sums to 1
};

// Log of the smallest positive double; per-species log-likelihoods are
// clamped here before normalisation.
inline constexpr double kLogFloor = -745.0;

// Weighted average of the classifier columns (width × s), each weighted by
// the likelihood of the context under that column. Throws
// Error(kEmptyContext) for no locations and Error(kAllZeroWeights) when
// every column's likelihood falls to the floor.
ActiveResult active_embedding(std::span<const geo::GeoPoint> context, const Tensor<float>& classifier,
                              model::LocationEncoder<float>& encoder);

struct LogRegConfig {
  double reg_weight = 20.0;
  std::size_t n_pseudo_uniform = 10000;
  std::size_t n_pseudo_target = 10000;
  double grad_tol = 1e-6;
  std::size_t max_iter = 100;
};

struct LogRegFit {
  SpeciesEmbedding head;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
};

// Minimises Σ_i logloss(y_i, σ(x_i·w + b)) + (reg/2)·‖w‖² by damped Newton
// steps; the bias is not penalised. Rows of `features` are examples.
LogRegFit fit_logistic(const Tensor<float>& features, std::span<const std::uint8_t> labels,
                       const LogRegConfig& cfg);

// Logistic-regression head on frozen location features: presences against
// pseudo-negatives drawn by pseudo_negatives(). Throws Error(kNoPresences).
LogRegFit fit_logreg_head(std::span<const geo::GeoPoint> presences,
                          model::LocationEncoder<float>& encoder,
                          std::span<const geo::GeoPoint> target_pool, const LogRegConfig& cfg,
                          std::mt19937_64& rng);
// Same, with the pseudo-negative features already computed.
LogRegFit fit_logreg_head(std::span<const geo::GeoPoint> presences,
                          model::LocationEncoder<float>& encoder,
                          const Tensor<float>& negative_features, const LogRegConfig& cfg);

struct EnsemblePrediction {
  geo::GridSpec grid;
  std::vector<float> mean;
  std::vector<float> variance;  // population variance across members
  std::size_t members = 0;
};

// Throws Error(kFewerThanTwoMembers) and Error(kGeometryMismatch).
EnsemblePrediction ensemble_predict(std::span<const geo::PredictionGrid> members);

struct EnsembleMember {
  model::FsSinrModel<float>* model = nullptr;
  const CellCache* cells = nullptr;
};
EnsemblePrediction ensemble_predict(std::span<const EnsembleMember> members,
                                    const model::ContextSet& ctx);

}  // namespace fsr::fewshot
