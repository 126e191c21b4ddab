#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fsr/data.hpp"
#include "fsr/eval.hpp"
#include "fsr/fewshot.hpp"
#include "fsr/model.hpp"
#include "json.hpp"

namespace fsr::eval {

inline const std::vector<std::size_t> kDefaultKs{0, 1, 2, 3, 4, 5, 8, 10, 15, 20, 50};

// Method names used in rows and reports.
inline constexpr const char* kFsSinr = "fsinr";            // k locations only
inline constexpr const char* kFsSinrText = "fsinr_text";   // text + k locations
inline constexpr const char* kPrototype = "prototype";     // SINR encoder prototypes
inline constexpr const char* kActive = "active";           // SINR classifier mixture
inline constexpr const char* kLogReg = "logreg";           // retrained SINR head

// For each species, an ordered draw without replacement of up to max_k of
// its observations; the k-shot context is the first k entries, so smaller
// contexts are always prefixes of larger ones.
std::map<std::uint32_t, std::vector<geo::GeoPoint>> nested_contexts(
    const data::ObservationStore& store, const std::vector<std::uint32_t>& species,
    std::size_t max_k, std::uint64_t seed);

struct EvalRow {
  std::string method;
  std::uint32_t species_id = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double ap = 0.0;
  double weighted_ap_h9 = 0.0;
  double weighted_ap_h99 = 0.0;
  std::vector<double> extra_weighted_ap;  // one per EvalOptions::extra_h
};

struct EvalData {
  std::map<std::uint32_t, geo::RangeMask> masks;  // species to evaluate, one shared grid
  const data::ObservationStore* observations = nullptr;  // context source
  const data::EmbeddingProvider* text = nullptr;
  std::vector<geo::GeoPoint> train_locations;  // pool for "target" pseudo-negatives
};

struct EvalOptions {
  std::vector<std::size_t> ks = kDefaultKs;
  std::vector<std::string> methods{kFsSinr, kFsSinrText, kPrototype, kActive, kLogReg};
  std::uint64_t seed = 0;
  // Distance-weighting strengths reported beyond the fixed h = 9 and 99.
  std::vector<double> extra_h;
  fewshot::LogRegConfig logreg;
};

// Scores every requested method at every k for every species. Baselines that
// need SINR use `sinr` and are skipped when it is null; methods without a
// k = 0 form skip that row. Context draws depend only on options.seed.
std::vector<EvalRow> evaluate(model::FsSinrModel<float>& fsinr, model::SinrModel<float>* sinr,
                              const EvalData& data, const EvalOptions& opts);

struct EnsembleRow {
  std::uint32_t species_id = 0;
  std::size_t k = 0;
  double ap_mean = 0.0;  // AP of the ensemble mean
  double seauc = 0.0;
  double aurg = 0.0;
};

// Ensemble mean and variance from text plus the k-shot context, scored by
// sparsification with the variance as uncertainty.
std::vector<EnsembleRow> evaluate_ensemble(std::span<const fewshot::EnsembleMember> members,
                                           const EvalData& data,
                                           const std::vector<std::size_t>& ks, std::uint64_t seed);

struct CurvePoint {
  MeanStd map;      // over seeds of the per-seed MAP
  MeanStd map_h9;
  MeanStd map_h99;
};
// (method, k) -> MAP summary.
std::map<std::pair<std::string, std::size_t>, CurvePoint> summarize(
    const std::vector<EvalRow>& rows);

nlohmann::json report_json(const std::vector<EvalRow>& rows,
                           const std::vector<EnsembleRow>& ensemble = {},
                           const std::vector<double>& extra_h = {});
// species_id,k,seed,ap,weighted_ap_h9,weighted_ap_h99 for one method, plus a
// weighted_ap_h<h> column per extra h.
void write_csv(const std::vector<EvalRow>& rows, const std::string& method,
               const std::filesystem::path& path, const std::vector<double>& extra_h = {});

}  // namespace fsr::eval
