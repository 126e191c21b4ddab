#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fsr/geo.hpp"

namespace fsr::eval {

// Weighted average precision. Cells are ranked by descending score with ties
// kept in input order, and every cell is its own threshold. An empty
// `weight` span means unit weights. Throws Error(kNoPositives) when no
// positive carries weight and Error(kShapeMismatch) for unequal lengths.
double average_precision(std::span<const double> score, std::span<const std::uint8_t> label,
                         std::span<const double> weight = {});

// 1 + h·d/d_antipodal. Throws Error(kDomainError) for negative d or h.
double distance_weight(double d_range_km, double h);

// Per-cell weights for a mask: positives get 1, negatives grow with their
// distance to the range.
std::vector<double> distance_weights(const geo::RangeMask& mask, double h);

// AP of one prediction grid against its mask. `distances` are the mask's
// distance field (reused across calls); h = 0 gives plain AP. Throws
// Error(kGeometryMismatch) when the grids differ.
double species_ap(const geo::PredictionGrid& pred, const geo::RangeMask& mask, double h = 0.0,
                  std::span<const double> distances = {});

struct SpeciesAp {
  std::uint32_t species_id = 0;
  double ap = 0.0;
};

struct MapResult {
  std::vector<SpeciesAp> per_species;  // ascending id
  double map = 0.0;
};

// Unweighted mean of per-species weighted APs. Every prediction needs a
// mask; throws Error(kGeometryMismatch) on missing masks or grid mismatch.
MapResult map_over_species(const std::map<std::uint32_t, geo::PredictionGrid>& predictions,
                           const std::map<std::uint32_t, geo::RangeMask>& masks, double h = 0.0);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t n = 0;
};
MeanStd mean_std(std::span<const double> values);

struct SparsificationResult {
  std::vector<double> fraction_kept;  // 1.0 first, decreasing
  std::vector<double> ap;
  double ap_all = 0.0;
  double seauc = 0.0;
  double aurg = 0.0;
};

// Removes the most uncertain `step` fraction of cells at a time (ties in
// uncertainty broken by a seeded shuffle) and recomputes AP on what is left,
// stopping before the positives run out. SEAUC is the trapezoidal area of AP
// over the fraction kept, divided by the span of fractions covered; AURG is
// SEAUC − AP on all cells. Throws Error(kGeometryMismatch) and
// Error(kNoPositives).
SparsificationResult sparsification_metrics(std::span<const float> mean,
                                            std::span<const float> uncertainty,
                                            const geo::RangeMask& mask, double step = 0.02,
                                            std::uint64_t tie_seed = 0);

struct GroupStat {
  double mean = 0.0;
  double sem = 0.0;  // standard error of the mean (0 for a single member)
  std::size_t n = 0;
};

// Per-group mean AP. Every species in `aps` must be assigned; throws
// Error(kEmptyGroup) when a listed group has no members and
// Error(kDomainError) for unassigned species.
std::map<std::string, GroupStat> group_report(const std::map<std::uint32_t, double>& aps,
                                              const std::map<std::uint32_t, std::string>& group_of,
                                              const std::vector<std::string>& groups);

// Splits species into `n_buckets` equal-count buckets by mask size, labelled
// "size-0" (smallest) upwards.
std::map<std::uint32_t, std::string> range_size_buckets(
    const std::map<std::uint32_t, geo::RangeMask>& masks, std::size_t n_buckets = 3);

}  // namespace fsr::eval
