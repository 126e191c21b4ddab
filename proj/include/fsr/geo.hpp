#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "json.hpp"

namespace fsr::geo {

// Sphere radius chosen so that half the circumference is 20,037.5 km.
inline constexpr double kEarthRadiusKm = 6378.137;
inline constexpr double kAntipodalKm = 20037.5;

// Latitude/longitude in degrees. Latitude is checked against [-90, 90] and
// longitude is wrapped into [-180, 180).
class GeoPoint {
 public:
  GeoPoint() = default;
  // Throws Error(kOutOfRangeCoordinate) on |lat| > 90 or non-finite input.
  GeoPoint(double lat, double lon);

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lat_ = 0.0;
  double lon_ = 0.0;
};

double normalize_lon(double lon);

// [sin(pi*lon/180), cos(pi*lon/180), sin(pi*lat/90), cos(pi*lat/90)]
using EncodedLocation = std::array<double, 4>;
EncodedLocation encode_location(const GeoPoint& p);

double haversine_km_deg(double lat1, double lon1, double lat2, double lon2);
double haversine_km(const GeoPoint& a, const GeoPoint& b);

std::vector<GeoPoint> sample_uniform_sphere(std::mt19937_64& rng,
                                            std::size_t n);

// Regular lat/lon raster. Row 0 is the northernmost row; columns run west to
// east. Cells are ceil(extent / res) per axis.
struct GridSpec {
  double lat_min = -90.0;
  double lat_max = 90.0;
  double lon_min = -180.0;
  double lon_max = 180.0;
  double res_deg = 1.0;

  std::size_t n_rows() const;
  std::size_t n_cols() const;
  std::size_t size() const { return n_rows() * n_cols(); }

  GeoPoint cell_center(std::size_t row, std::size_t col) const;
  GeoPoint cell_center(std::size_t index) const {
    return cell_center(index / n_cols(), index % n_cols());
  }
  // Row-major index of the cell containing p, if p lies inside the raster.
  std::optional<std::size_t> locate(const GeoPoint& p) const;
  std::vector<GeoPoint> centers() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Throws Error(kDomainError) when bounds or resolution are unusable.
void validate(const GridSpec& grid);

// Bounds, resolution and derived row/column counts. Parsing validates the
// bounds and, when present, the counts.
nlohmann::json to_json(const GridSpec& grid);
GridSpec grid_from_json(const nlohmann::json& j);

struct RangeMask {
  GridSpec grid;
  std::vector<std::uint8_t> cells;  // 0/1, row-major

  std::size_t positives() const;
  double coverage() const;
};

struct PredictionGrid {
  GridSpec grid;
  std::vector<float> cells;  // probabilities in [0, 1], row-major
};

// Distance from p to the nearest positive cell center, or 0 when p lies in a
// positive cell. Throws Error(kEmptyRange) for an all-negative mask.
double distance_to_range_km(const GeoPoint& p, const RangeMask& mask);

// Same quantity for every cell center of the mask's own grid.
std::vector<double> distance_field_km(const RangeMask& mask);

// `<base>.mask.json` + `<base>.mask.bin`
void save_mask(const RangeMask& mask, const std::filesystem::path& base);
RangeMask load_mask(const std::filesystem::path& base);

// `<base>.grid.json` + `<base>.grid.bin` (little-endian float32 cells)
void save_prediction(const PredictionGrid& grid,
                     const std::filesystem::path& base);
PredictionGrid load_prediction(const std::filesystem::path& base);

}  // namespace fsr::geo
