#include "fsr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fsr/error.hpp"

namespace fsr::eval {

double average_precision(std::span<const double> score, std::span<const std::uint8_t> label,
                         std::span<const double> weight) {
  const std::size_t n = score.size();
  if (label.size() != n || (!weight.empty() && weight.size() != n)) {
    throw Error(ErrorCode::kShapeMismatch, "scores, labels and weights must have equal length");
  }
  auto w = [&](std::size_t i) { return weight.empty() ? 1.0 : weight[i]; };
  double total_pos = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i]) total_pos += w(i);
  }
  if (!(total_pos > 0.0)) throw Error(ErrorCode::kNoPositives, "no positive cells");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  double seen = 0.0, seen_pos = 0.0, ap = 0.0;
  for (const std::size_t i : order) {
    seen += w(i);
    if (!label[i]) continue;
    seen_pos += w(i);
    // Recall rises by w/total_pos at each positive; precision is the prefix ratio.
    ap += (w(i) / total_pos) * (seen_pos / seen);
  }
  return ap;
}

double distance_weight(double d_range_km, double h) {
  if (!(d_range_km >= 0.0) || !(h >= 0.0)) {
    throw Error(ErrorCode::kDomainError, "distance and h must be nonnegative");
  }
  return 1.0 + d_range_km / geo::kAntipodalKm * h;
}

std::vector<double> distance_weights(const geo::RangeMask& mask, double h) {
  std::vector<double> out(mask.cells.size(), 1.0);
  if (h == 0.0) return out;
  const auto d = geo::distance_field_km(mask);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask.cells[i] ? 1.0 : distance_weight(d[i], h);
  return out;
}

namespace {

void check_geometry(const geo::GridSpec& a, std::size_t a_cells, const geo::RangeMask& mask) {
  if (!(a == mask.grid) || a_cells != mask.cells.size()) {
    throw Error(ErrorCode::kGeometryMismatch, "prediction grid differs from the mask grid");
  }
}

}  // namespace

double species_ap(const geo::PredictionGrid& pred, const geo::RangeMask& mask, double h,
                  std::span<const double> distances) {
  check_geometry(pred.grid, pred.cells.size(), mask);
  const std::vector<double> score(pred.cells.begin(), pred.cells.end());
  if (h == 0.0) return average_precision(score, mask.cells);
  std::vector<double> owned;
  if (distances.empty()) {
    owned = geo::distance_field_km(mask);
    distances = owned;
  }
  if (distances.size() != mask.cells.size()) {
    throw Error(ErrorCode::kGeometryMismatch, "distance field differs from the mask grid");
  }
  std::vector<double> w(mask.cells.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = mask.cells[i] ? 1.0 : distance_weight(distances[i], h);
  }
  return average_precision(score, mask.cells, w);
}

MapResult map_over_species(const std::map<std::uint32_t, geo::PredictionGrid>& predictions,
                           const std::map<std::uint32_t, geo::RangeMask>& masks, double h) {
  MapResult out;
  for (const auto& [id, pred] : predictions) {
    const auto it = masks.find(id);
    if (it == masks.end()) {
      throw Error(ErrorCode::kGeometryMismatch, "no mask for species " + std::to_string(id));
    }
    out.per_species.push_back({id, species_ap(pred, it->second, h)});
  }
  for (const auto& s : out.per_species) out.map += s.ap;
  if (!out.per_species.empty()) out.map /= static_cast<double>(out.per_species.size());
  return out;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

SparsificationResult sparsification_metrics(std::span<const float> mean,
                                            std::span<const float> uncertainty,
                                            const geo::RangeMask& mask, double step,
                                            std::uint64_t tie_seed) {
  const std::size_t n = mask.cells.size();
  if (mean.size() != n || uncertainty.size() != n) {
    throw Error(ErrorCode::kGeometryMismatch, "mean, uncertainty and mask sizes differ");
  }
  if (!(step > 0.0 && step < 1.0)) throw Error(ErrorCode::kDomainError, "step must be in (0, 1)");

  // Most uncertain first; a seeded shuffle settles equal uncertainties.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(tie_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return uncertainty[a] > uncertainty[b];
  });

  SparsificationResult out;
  std::vector<std::uint8_t> keep(n, 1);
  std::size_t removed = 0;
  std::vector<double> score;
  std::vector<std::uint8_t> label;
  for (std::size_t i = 0;; ++i) {
    const double frac_removed = static_cast<double>(i) * step;
    if (frac_removed >= 1.0 - 1e-12) break;
    const auto target = static_cast<std::size_t>(std::llround(frac_removed * static_cast<double>(n)));
    while (removed < std::min(target, n)) keep[order[removed++]] = 0;
    score.clear();
    label.clear();
    bool any_pos = false;
    for (std::size_t c = 0; c < n; ++c) {
      if (!keep[c]) continue;
      score.push_back(mean[c]);
      label.push_back(mask.cells[c]);
      any_pos |= mask.cells[c] != 0;
    }
    if (!any_pos) {
      if (i == 0) throw Error(ErrorCode::kNoPositives, "mask has no positive cells");
      break;
    }
    out.fraction_kept.push_back(static_cast<double>(n - removed) / static_cast<double>(n));
    out.ap.push_back(average_precision(score, label));
  }
  out.ap_all = out.ap.front();
  if (out.ap.size() == 1) {
    out.seauc = out.ap_all;
  } else {
    double area = 0.0;
    for (std::size_t i = 1; i < out.ap.size(); ++i) {
      area += 0.5 * (out.ap[i] + out.ap[i - 1]) * (out.fraction_kept[i - 1] - out.fraction_kept[i]);
    }
    out.seauc = area / (out.fraction_kept.front() - out.fraction_kept.back());
  }
  out.aurg = out.seauc - out.ap_all;
  return out;
}

std::map<std::string, GroupStat> group_report(const std::map<std::uint32_t, double>& aps,
                                              const std::map<std::uint32_t, std::string>& group_of,
                                              const std::vector<std::string>& groups) {
  std::map<std::string, std::vector<double>> members;
  for (const auto& g : groups) members[g];
  for (const auto& [id, ap] : aps) {
    const auto it = group_of.find(id);
    if (it == group_of.end() || !members.count(it->second)) {
      throw Error(ErrorCode::kDomainError, "species " + std::to_string(id) + " has no group");
    }
    members[it->second].push_back(ap);
  }
  std::map<std::string, GroupStat> out;
  for (const auto& [g, values] : members) {
    if (values.empty()) throw Error(ErrorCode::kEmptyGroup, "group '" + g + "' has no species");
    GroupStat s;
    s.n = values.size();
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(s.n);
    if (s.n > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - s.mean) * (v - s.mean);
      s.sem = std::sqrt(ss / static_cast<double>(s.n - 1)) / std::sqrt(static_cast<double>(s.n));
    }
    out[g] = s;
  }
  return out;
}

std::map<std::uint32_t, std::string> range_size_buckets(
    const std::map<std::uint32_t, geo::RangeMask>& masks, std::size_t n_buckets) {
  if (n_buckets == 0 || n_buckets > masks.size()) {
    throw Error(ErrorCode::kDomainError, "bucket count must be in [1, number of species]");
  }
  std::vector<std::pair<std::size_t, std::uint32_t>> sizes;
  for (const auto& [id, m] : masks) sizes.emplace_back(m.positives(), id);
  std::sort(sizes.begin(), sizes.end());
  std::map<std::uint32_t, std::string> out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    out[sizes[i].second] = "size-" + std::to_string(i * n_buckets / sizes.size());
  }
  return out;
}

}  // namespace fsr::eval
