#include "fsr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "fsr/error.hpp"

namespace fsr::data {

namespace {

using nlohmann::json;

constexpr int kNicheAttempts = 16;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::size_t band(double v, double lo, double hi, std::size_t n) {
  const auto b = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * n));
  return std::min(b, n - 1);
}

// Bag of words shared across species: coarse position, extent and the
// strongest environmental preferences.
std::string describe(const SpeciesNiche& s, const geo::GridSpec& g, double coverage) {
  const auto lat_zone = band(s.center.lat(), g.lat_min, g.lat_max, 3);
  const auto lon_zone = band(s.center.lon(), g.lon_min, g.lon_max, 4);
  std::ostringstream os;
  os << "found in lat-zone-" << lat_zone << " lon-zone-" << lon_zone << " region-" << lat_zone
     << "-" << lon_zone;
  os << (coverage < 0.05 ? " range-small" : coverage < 0.1 ? " range-medium" : " range-large");
  os << " prefers";
  for (std::size_t f = 0; f < s.field_weights.size(); ++f) {
    if (std::abs(s.field_weights[f]) >= 0.4) {
      os << " field-" << f << (s.field_weights[f] > 0 ? "-high" : "-low");
    }
  }
  return os.str();
}

json point_json(const geo::GeoPoint& p) { return json{p.lat(), p.lon()}; }
geo::GeoPoint point_from(const json& j) {
  return geo::GeoPoint(j.at(0).get<double>(), j.at(1).get<double>());
}

}  // namespace

json to_json(const WorldConfig& c) {
  return json{{"seed", c.seed},
              {"n_species", c.n_species},
              {"n_env_fields", c.n_env_fields},
              {"bumps_per_field", c.bumps_per_field},
              {"obs_per_species", c.obs_per_species},
              {"holdout_fraction", c.holdout_fraction},
              {"grid", geo::to_json(c.grid)},
              {"coverage_min", c.coverage_min},
              {"coverage_max", c.coverage_max},
              {"density_bias", c.density_bias}};
}

WorldConfig world_config_from_json(const json& j) {
  WorldConfig c;
  c.seed = j.value("seed", c.seed);
  c.n_species = j.value("n_species", c.n_species);
  c.n_env_fields = j.value("n_env_fields", c.n_env_fields);
  c.bumps_per_field = j.value("bumps_per_field", c.bumps_per_field);
  c.obs_per_species = j.value("obs_per_species", c.obs_per_species);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  if (j.contains("grid")) c.grid = geo::grid_from_json(j.at("grid"));
  c.coverage_min = j.value("coverage_min", c.coverage_min);
  c.coverage_max = j.value("coverage_max", c.coverage_max);
  c.density_bias = j.value("density_bias", c.density_bias);
  return c;
}

double EnvField::raw(const geo::GeoPoint& x) const {
  double v = 0.0;
  for (const auto& b : bumps) {
    const double d = geo::haversine_km(x, b.center) / b.width_km;
    v += b.amplitude * std::exp(-0.5 * d * d);
  }
  return v;
}

std::vector<std::uint32_t> SyntheticWorld::train_ids() const {
  std::vector<std::uint32_t> out;
  for (const auto& s : species) {
    if (!s.holdout) out.push_back(s.id);
  }
  return out;
}

std::vector<std::uint32_t> SyntheticWorld::holdout_ids() const {
  std::vector<std::uint32_t> out;
  for (const auto& s : species) {
    if (s.holdout) out.push_back(s.id);
  }
  return out;
}

std::map<std::uint32_t, std::string> SyntheticWorld::texts() const {
  std::map<std::uint32_t, std::string> out;
  for (const auto& s : species) out[s.id] = s.text;
  return out;
}

const SpeciesNiche& SyntheticWorld::niche(std::uint32_t id) const {
  for (const auto& s : species) {
    if (s.id == id) return s;
  }
  throw Error(ErrorCode::kDomainError, "unknown species " + std::to_string(id));
}

double SyntheticWorld::suitability(const SpeciesNiche& s, const geo::GeoPoint& x) const {
  double env = 0.0;
  for (std::size_t f = 0; f < fields.size(); ++f) env += s.field_weights[f] * fields[f].value(x);
  return sigmoid(s.alpha * env - s.beta * geo::haversine_km(x, s.center) / s.length_km);
}

SyntheticWorld generate_synthetic_world(const WorldConfig& cfg) {
  if (cfg.n_species < 2) throw Error(ErrorCode::kDomainError, "need at least 2 species");
  if (cfg.obs_per_species < 1) {
    throw Error(ErrorCode::kDomainError, "need at least 1 observation per species");
  }
  if (!(cfg.holdout_fraction >= 0.0 && cfg.holdout_fraction < 1.0) ||
      !(cfg.coverage_min > 0.0 && cfg.coverage_min < cfg.coverage_max && cfg.coverage_max <= 1.0)) {
    throw Error(ErrorCode::kDomainError, "holdout fraction or coverage bounds out of range");
  }
  geo::validate(cfg.grid);

  SyntheticWorld world;
  world.config = cfg;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const auto& g = cfg.grid;
  const auto centers = g.centers();

  for (std::size_t f = 0; f < cfg.n_env_fields; ++f) {
    EnvField field;
    std::normal_distribution<double> amp(0.0, 1.0);
    for (std::size_t b = 0; b < cfg.bumps_per_field; ++b) {
      field.bumps.push_back({geo::GeoPoint(uniform(g.lat_min, g.lat_max),
                                           uniform(g.lon_min, g.lon_max)),
                             amp(rng), uniform(800.0, 2500.0)});
    }
    double sum = 0.0, sq = 0.0;
    for (const auto& c : centers) {
      const double v = field.raw(c);
      sum += v;
      sq += v * v;
    }
    field.mean = sum / centers.size();
    field.stddev = std::sqrt(std::max(sq / centers.size() - field.mean * field.mean, 1e-12));
    world.fields.push_back(std::move(field));
  }

  const double inset = std::min({3.0, (g.lat_max - g.lat_min) / 4, (g.lon_max - g.lon_min) / 4});
  const double log_lo = std::log(std::max(cfg.coverage_min * 1.5, cfg.coverage_min));
  const double log_hi = std::log(std::max(cfg.coverage_max * 0.75, cfg.coverage_min * 1.5));
  std::vector<double> suit(centers.size());

  for (std::uint32_t id = 0; id < cfg.n_species; ++id) {
    SpeciesNiche s;
    s.id = id;
    geo::RangeMask mask;
    mask.grid = g;
    bool ok = false;
    for (int attempt = 0; attempt < kNicheAttempts && !ok; ++attempt) {
      s.center = geo::GeoPoint(uniform(g.lat_min + inset, g.lat_max - inset),
                               uniform(g.lon_min + inset, g.lon_max - inset));
      std::normal_distribution<double> n01(0.0, 1.0);
      s.field_weights.assign(cfg.n_env_fields, 0.0);
      double norm = 0.0;
      for (auto& w : s.field_weights) {
        w = n01(rng);
        norm += w * w;
      }
      norm = std::sqrt(norm);
      for (auto& w : s.field_weights) w = norm > 0 ? w / norm : 0.0;
      s.alpha = uniform(0.5, 2.0);
      s.beta = uniform(1.5, 4.0);
      s.length_km = uniform(600.0, 1800.0);
      const double target = std::exp(uniform(log_lo, log_hi));

      for (std::size_t i = 0; i < centers.size(); ++i) suit[i] = world.suitability(s, centers[i]);
      std::vector<double> sorted = suit;
      const auto k = static_cast<std::size_t>((1.0 - target) * sorted.size());
      std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
      s.tau = sorted[k];
      mask.cells.assign(centers.size(), 0);
      for (std::size_t i = 0; i < centers.size(); ++i) mask.cells[i] = suit[i] >= s.tau ? 1 : 0;
      const double cov = mask.coverage();
      ok = mask.positives() > 0 && cov >= cfg.coverage_min && cov <= cfg.coverage_max;
      if (ok) s.text = describe(s, g, cov);
    }
    if (!ok) {
      throw Error(ErrorCode::kDegenerateSpecies,
                  "species " + std::to_string(id) + ": no range within coverage bounds");
    }

    std::vector<double> weights(centers.size(), 0.0);
    for (std::size_t i = 0; i < centers.size(); ++i) {
      if (mask.cells[i]) {
        const double bias =
            world.fields.empty() ? 0.0 : cfg.density_bias * world.fields[0].value(centers[i]);
        weights[i] = suit[i] * std::exp(bias);
      }
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    const double half = 0.499 * g.res_deg;
    for (std::size_t n = 0; n < cfg.obs_per_species; ++n) {
      const auto& c = centers[pick(rng)];
      world.observations.add(id, geo::GeoPoint(c.lat() + uniform(-half, half),
                                               c.lon() + uniform(-half, half)));
    }
    world.masks.emplace(id, std::move(mask));
    world.species.push_back(std::move(s));
  }

  std::size_t n_hold = static_cast<std::size_t>(std::lround(cfg.holdout_fraction * cfg.n_species));
  if (cfg.holdout_fraction > 0.0) n_hold = std::clamp<std::size_t>(n_hold, 1, cfg.n_species - 1);
  std::vector<std::size_t> order(cfg.n_species);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < n_hold; ++i) world.species[order[i]].holdout = true;
  return world;
}

void save_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "masks");
  json fields = json::array();
  for (const auto& f : world.fields) {
    json bumps = json::array();
    for (const auto& b : f.bumps) {
      bumps.push_back({{"center", point_json(b.center)},
                       {"amplitude", b.amplitude},
                       {"width_km", b.width_km}});
    }
    fields.push_back({{"mean", f.mean}, {"stddev", f.stddev}, {"bumps", bumps}});
  }
  json species = json::array();
  json texts = json::object();
  for (const auto& s : world.species) {
    species.push_back({{"id", s.id},
                       {"center", point_json(s.center)},
                       {"field_weights", s.field_weights},
                       {"alpha", s.alpha},
                       {"beta", s.beta},
                       {"length_km", s.length_km},
                       {"tau", s.tau},
                       {"holdout", s.holdout}});
    texts[std::to_string(s.id)] = s.text;
    geo::save_mask(world.masks.at(s.id), dir / "masks" / std::to_string(s.id));
  }
  std::ofstream(dir / "world.json")
      << json{{"config", to_json(world.config)}, {"fields", fields}, {"species", species}}.dump(2)
      << '\n';
  std::ofstream(dir / "texts.json") << texts.dump(2) << '\n';
  save_observations(world.observations, dir / "observations.csv");
}

SyntheticWorld load_world(const std::filesystem::path& dir) {
  auto read_json = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + p.string());
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kCorruptManifest, p.string() + ": " + e.what());
    }
  };
  const json w = read_json(dir / "world.json");
  const json texts = read_json(dir / "texts.json");
  SyntheticWorld world;
  try {
    world.config = world_config_from_json(w.at("config"));
    for (const auto& f : w.at("fields")) {
      EnvField field;
      field.mean = f.at("mean").get<double>();
      field.stddev = f.at("stddev").get<double>();
      for (const auto& b : f.at("bumps")) {
        field.bumps.push_back({point_from(b.at("center")), b.at("amplitude").get<double>(),
                               b.at("width_km").get<double>()});
      }
      world.fields.push_back(std::move(field));
    }
    for (const auto& j : w.at("species")) {
      SpeciesNiche s;
      s.id = j.at("id").get<std::uint32_t>();
      s.center = point_from(j.at("center"));
      s.field_weights = j.at("field_weights").get<std::vector<double>>();
      s.alpha = j.at("alpha").get<double>();
      s.beta = j.at("beta").get<double>();
      s.length_km = j.at("length_km").get<double>();
      s.tau = j.at("tau").get<double>();
      s.holdout = j.at("holdout").get<bool>();
      s.text = texts.value(std::to_string(s.id), std::string());
      world.masks.emplace(s.id, geo::load_mask(dir / "masks" / std::to_string(s.id)));
      world.species.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptManifest, (dir / "world.json").string() + ": " + e.what());
  }
  world.observations = load_observations(dir / "observations.csv");
  return world;
}

}  // namespace fsr::data
