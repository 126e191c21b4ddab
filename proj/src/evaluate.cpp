#include "fsr/evaluate.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <tuple>

#include "fsr/error.hpp"

namespace fsr::eval {

namespace {

const geo::GridSpec& shared_grid(const EvalData& data) {
  if (data.masks.empty()) throw Error(ErrorCode::kDomainError, "no species to evaluate");
  const auto& grid = data.masks.begin()->second.grid;
  for (const auto& [id, m] : data.masks) {
    if (!(m.grid == grid)) {
      throw Error(ErrorCode::kGeometryMismatch,
                  "mask for species " + std::to_string(id) + " uses a different grid");
    }
  }
  if (data.observations == nullptr) {
    throw Error(ErrorCode::kDomainError, "evaluation needs an observation store for contexts");
  }
  return grid;
}

std::vector<std::uint32_t> species_of(const EvalData& data) {
  std::vector<std::uint32_t> ids;
  for (const auto& [id, _] : data.masks) ids.push_back(id);
  return ids;
}

std::vector<geo::GeoPoint> prefix(const std::vector<geo::GeoPoint>& all, std::size_t k) {
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(k, all.size()))};
}

bool wants(const EvalOptions& o, const char* method) {
  return std::find(o.methods.begin(), o.methods.end(), method) != o.methods.end();
}

}  // namespace

std::map<std::uint32_t, std::vector<geo::GeoPoint>> nested_contexts(
    const data::ObservationStore& store, const std::vector<std::uint32_t>& species,
    std::size_t max_k, std::uint64_t seed) {
  std::map<std::uint32_t, std::vector<geo::GeoPoint>> out;
  for (const auto id : species) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(id)};
    std::mt19937_64 rng(seq);
    auto idx = store.indices_of(id);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(idx.size(), max_k));
    auto& pts = out[id];
    for (const auto r : idx) pts.push_back(store[r].location);
  }
  return out;
}

std::vector<EvalRow> evaluate(model::FsSinrModel<float>& fsinr, model::SinrModel<float>* sinr,
                              const EvalData& data, const EvalOptions& opts) {
  const auto& grid = shared_grid(data);
  const auto ids = species_of(data);
  const std::size_t max_k = opts.ks.empty() ? 0 : *std::max_element(opts.ks.begin(), opts.ks.end());
  const auto contexts = nested_contexts(*data.observations, ids, max_k, opts.seed);

  const fewshot::CellCache fs_cells(fsinr.encoder, grid);
  const bool baselines =
      sinr != nullptr && (wants(opts, kPrototype) || wants(opts, kActive) || wants(opts, kLogReg));
  std::optional<fewshot::CellCache> sinr_cells;
  diff::Tensor<float> neg_features;
  fewshot::PrototypePair protos;
  if (baselines) {
    sinr_cells.emplace(sinr->encoder, grid);
    std::seed_seq seq{opts.seed, std::uint64_t{0x6e6567}};
    std::mt19937_64 rng(seq);
    const auto negatives = fewshot::pseudo_negatives(
        opts.logreg.n_pseudo_uniform, opts.logreg.n_pseudo_target, data.train_locations, rng);
    neg_features = model::embed_points(sinr->encoder, negatives);
    protos.absent.assign(neg_features.cols(), 0.0);
    for (std::size_t r = 0; r < neg_features.rows(); ++r) {
      for (std::size_t c = 0; c < neg_features.cols(); ++c) protos.absent[c] += neg_features(r, c);
    }
    for (auto& v : protos.absent) v /= static_cast<double>(std::max<std::size_t>(1, neg_features.rows()));
  }

  std::vector<EvalRow> rows;
  for (const auto id : ids) {
    const auto& mask = data.masks.at(id);
    const auto dist = geo::distance_field_km(mask);
    std::optional<std::vector<float>> text;
    if (data.text != nullptr) text = data.text->lookup(id);
    auto record = [&](const char* method, std::size_t k, const geo::PredictionGrid& pred) {
      EvalRow row{method, id, k, opts.seed, species_ap(pred, mask, 0.0, dist),
                  species_ap(pred, mask, 9.0, dist), species_ap(pred, mask, 99.0, dist), {}};
      for (const double h : opts.extra_h) row.extra_weighted_ap.push_back(species_ap(pred, mask, h, dist));
      rows.push_back(std::move(row));
    };
    for (const auto k : opts.ks) {
      const auto ctx = prefix(contexts.at(id), k);
      if (wants(opts, kFsSinr)) {
        record(kFsSinr, k, fewshot::feedforward_range(fsinr, {ctx, std::nullopt, std::nullopt}, fs_cells));
      }
      if (wants(opts, kFsSinrText) && text) {
        record(kFsSinrText, k, fewshot::feedforward_range(fsinr, {ctx, text, std::nullopt}, fs_cells));
      }
      if (!baselines || ctx.empty()) continue;
      if (wants(opts, kPrototype)) {
        protos.present.assign(neg_features.cols(), 0.0);
        const auto f = model::embed_points(sinr->encoder, ctx);
        for (std::size_t r = 0; r < f.rows(); ++r) {
          for (std::size_t c = 0; c < f.cols(); ++c) protos.present[c] += f(r, c);
        }
        for (auto& v : protos.present) v /= static_cast<double>(f.rows());
        record(kPrototype, k, fewshot::prototype_range(protos, *sinr_cells));
      }
      if (wants(opts, kActive)) {
        geo::PredictionGrid pred;
        try {
          const auto act = fewshot::active_embedding(ctx, sinr->classifier.value, sinr->encoder);
          pred = fewshot::score_grid(act.embedding, *sinr_cells);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kAllZeroWeights) throw;
          // No column explains the context: an uninformative map.
          pred = {grid, std::vector<float>(grid.size(), 0.5f)};
        }
        record(kActive, k, pred);
      }
      if (wants(opts, kLogReg)) {
        const auto fit = fewshot::fit_logreg_head(ctx, sinr->encoder, neg_features, opts.logreg);
        record(kLogReg, k, fewshot::score_grid(fit.head, *sinr_cells));
      }
    }
  }
  return rows;
}

std::vector<EnsembleRow> evaluate_ensemble(std::span<const fewshot::EnsembleMember> members,
                                           const EvalData& data,
                                           const std::vector<std::size_t>& ks,
                                           std::uint64_t seed) {
  shared_grid(data);
  const auto ids = species_of(data);
  const std::size_t max_k = ks.empty() ? 0 : *std::max_element(ks.begin(), ks.end());
  const auto contexts = nested_contexts(*data.observations, ids, max_k, seed);
  std::vector<EnsembleRow> rows;
  for (const auto id : ids) {
    std::optional<std::vector<float>> text;
    if (data.text != nullptr) text = data.text->lookup(id);
    for (const auto k : ks) {
      const model::ContextSet ctx{prefix(contexts.at(id), k), text, std::nullopt};
      const auto ens = fewshot::ensemble_predict(members, ctx);
      const auto sp = sparsification_metrics(ens.mean, ens.variance, data.masks.at(id), 0.02,
                                             seed ^ (std::uint64_t{id} << 32) ^ k);
      rows.push_back({id, k, sp.ap_all, sp.seauc, sp.aurg});
    }
  }
  return rows;
}

std::map<std::pair<std::string, std::size_t>, CurvePoint> summarize(
    const std::vector<EvalRow>& rows) {
  struct Acc {
    double ap = 0, h9 = 0, h99 = 0;
    std::size_t n = 0;
  };
  std::map<std::tuple<std::string, std::size_t, std::uint64_t>, Acc> per_seed;
  for (const auto& r : rows) {
    auto& a = per_seed[{r.method, r.k, r.seed}];
    a.ap += r.ap;
    a.h9 += r.weighted_ap_h9;
    a.h99 += r.weighted_ap_h99;
    ++a.n;
  }
  std::map<std::pair<std::string, std::size_t>, std::array<std::vector<double>, 3>> maps;
  for (const auto& [key, a] : per_seed) {
    auto& m = maps[{std::get<0>(key), std::get<1>(key)}];
    m[0].push_back(a.ap / static_cast<double>(a.n));
    m[1].push_back(a.h9 / static_cast<double>(a.n));
    m[2].push_back(a.h99 / static_cast<double>(a.n));
  }
  std::map<std::pair<std::string, std::size_t>, CurvePoint> out;
  for (const auto& [key, m] : maps) out[key] = {mean_std(m[0]), mean_std(m[1]), mean_std(m[2])};
  return out;
}

namespace {

std::string h_suffix(double h) {
  std::ostringstream os;
  os << 'h' << h;
  return os.str();
}

std::string h_label(double h) { return "weighted_ap_" + h_suffix(h); }

}  // namespace

nlohmann::json report_json(const std::vector<EvalRow>& rows,
                           const std::vector<EnsembleRow>& ensemble,
                           const std::vector<double>& extra_h) {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"method", r.method},
                         {"species_id", r.species_id},
                         {"k", r.k},
                         {"seed", r.seed},
                         {"ap", r.ap},
                         {"weighted_ap_h9", r.weighted_ap_h9},
                         {"weighted_ap_h99", r.weighted_ap_h99}});
    for (std::size_t i = 0; i < extra_h.size() && i < r.extra_weighted_ap.size(); ++i) {
      j["rows"].back()[h_label(extra_h[i])] = r.extra_weighted_ap[i];
    }
  }
  j["summary"] = nlohmann::json::array();
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> extra_sums;
  std::map<std::pair<std::string, std::size_t>, std::size_t> extra_counts;
  for (const auto& r : rows) {
    auto& v = extra_sums[{r.method, r.k}];
    v.resize(r.extra_weighted_ap.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += r.extra_weighted_ap[i];
    ++extra_counts[{r.method, r.k}];
  }
  for (const auto& [key, c] : summarize(rows)) {
    j["summary"].push_back({{"method", key.first},
                            {"k", key.second},
                            {"seeds", c.map.n},
                            {"map_mean", c.map.mean},
                            {"map_std", c.map.std},
                            {"map_h9_mean", c.map_h9.mean},
                            {"map_h99_mean", c.map_h99.mean}});
    const auto& v = extra_sums[key];
    for (std::size_t i = 0; i < extra_h.size() && i < v.size(); ++i) {
      j["summary"].back()["map_" + h_suffix(extra_h[i]) + "_mean"] =
          v[i] / static_cast<double>(extra_counts[key]);
    }
  }
  if (!ensemble.empty()) {
    j["ensemble"] = nlohmann::json::array();
    std::map<std::size_t, std::array<double, 4>> by_k;
    for (const auto& e : ensemble) {
      j["ensemble"].push_back({{"species_id", e.species_id},
                               {"k", e.k},
                               {"ap_mean", e.ap_mean},
                               {"seauc", e.seauc},
                               {"aurg", e.aurg}});
      auto& a = by_k[e.k];
      a[0] += e.ap_mean;
      a[1] += e.seauc;
      a[2] += e.aurg;
      a[3] += 1;
    }
    j["ensemble_summary"] = nlohmann::json::array();
    for (const auto& [k, a] : by_k) {
      j["ensemble_summary"].push_back(
          {{"k", k}, {"map", a[0] / a[3]}, {"seauc", a[1] / a[3]}, {"aurg", a[2] / a[3]}});
    }
  }
  return j;
}

void write_csv(const std::vector<EvalRow>& rows, const std::string& method,
               const std::filesystem::path& path, const std::vector<double>& extra_h) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "species_id,k,seed,ap,weighted_ap_h9,weighted_ap_h99";
  for (const double h : extra_h) out << ',' << h_label(h);
  out << '\n';
  out.precision(17);
  for (const auto& r : rows) {
    if (r.method != method) continue;
    out << r.species_id << ',' << r.k << ',' << r.seed << ',' << r.ap << ','
        << r.weighted_ap_h9 << ',' << r.weighted_ap_h99;
    for (std::size_t i = 0; i < extra_h.size(); ++i) {
      out << ',' << (i < r.extra_weighted_ap.size() ? r.extra_weighted_ap[i] : 0.0);
    }
    out << '\n';
  }
}

}  // namespace fsr::eval
