#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fsr/data.hpp"
#include "fsr/geo.hpp"

namespace fsr::data {

struct WorldConfig {
  std::uint64_t seed = 0;
  std::size_t n_species = 32;
  std::size_t n_env_fields = 4;
  std::size_t bumps_per_field = 6;
  std::size_t obs_per_species = 200;
  double holdout_fraction = 0.25;
  geo::GridSpec grid{-30.0, 30.0, -45.0, 45.0, 1.0};
  double coverage_min = 0.02;
  double coverage_max = 0.20;
  // > 0 favours observations where environment field 0 is high.
  double density_bias = 0.0;

  friend bool operator==(const WorldConfig&, const WorldConfig&) = default;
};

nlohmann::json to_json(const WorldConfig& c);
WorldConfig world_config_from_json(const nlohmann::json& j);

struct EnvBump {
  geo::GeoPoint center;
  double amplitude = 0.0;
  double width_km = 0.0;
};

// Sum of Gaussian bumps in great-circle distance, standardised with the
// mean/std of its raw values over the world grid.
struct EnvField {
  std::vector<EnvBump> bumps;
  double mean = 0.0;
  double stddev = 1.0;

  double raw(const geo::GeoPoint& x) const;
  double value(const geo::GeoPoint& x) const { return (raw(x) - mean) / stddev; }
};

// suitability(x) = sigmoid(alpha · Σ_f w_f E_f(x) − beta · d(x, center) / length)
struct SpeciesNiche {
  std::uint32_t id = 0;
  geo::GeoPoint center;
  std::vector<double> field_weights;
  double alpha = 1.0;
  double beta = 1.0;
  double length_km = 1000.0;
  double tau = 0.5;  // range = {suitability >= tau}
  bool holdout = false;
  std::string text;
};

struct SyntheticWorld {
  WorldConfig config;
  std::vector<EnvField> fields;
  std::vector<SpeciesNiche> species;
  std::map<std::uint32_t, geo::RangeMask> masks;
  ObservationStore observations;

  std::vector<std::uint32_t> train_ids() const;
  std::vector<std::uint32_t> holdout_ids() const;
  std::map<std::uint32_t, std::string> texts() const;
  const SpeciesNiche& niche(std::uint32_t id) const;
  double suitability(const SpeciesNiche& s, const geo::GeoPoint& x) const;
};

// Throws Error(kDomainError) for n_species < 2 or obs_per_species < 1, and
// Error(kDegenerateSpecies) if a species cannot be given a range inside the
// coverage bounds.
SyntheticWorld generate_synthetic_world(const WorldConfig& cfg);

// Directory layout: world.json, masks/<id>.mask.{json,bin}, observations.csv,
// texts.json.
void save_world(const SyntheticWorld& world, const std::filesystem::path& dir);
SyntheticWorld load_world(const std::filesystem::path& dir);

}  // namespace fsr::data
