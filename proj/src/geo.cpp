#include "fsr/geo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include "fsr/error.hpp"
#include "fsr/kernels.hpp"
#include "json.hpp"

namespace fsr::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

using nlohmann::json;

std::filesystem::path with_suffix(const std::filesystem::path& base,
                                  const char* suffix) {
  return std::filesystem::path(base.string() + suffix);
}

GridSpec parse_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  try {
    return grid_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptManifest, path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

double normalize_lon(double lon) {
  double x = std::fmod(lon + 180.0, 360.0);
  if (x < 0) x += 360.0;
  x -= 180.0;
  // fmod can round up to exactly +180 for tiny negative inputs.
  return x >= 180.0 ? -180.0 : x;
}

GeoPoint::GeoPoint(double lat, double lon) {
  if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 ||
      lat > 90.0) {
    throw Error(ErrorCode::kOutOfRangeCoordinate,
                "lat=" + std::to_string(lat) + " lon=" + std::to_string(lon));
  }
  lat_ = lat;
  lon_ = normalize_lon(lon);
}

EncodedLocation encode_location(const GeoPoint& p) {
  const double lon = std::numbers::pi * p.lon() / 180.0;
  const double lat = std::numbers::pi * p.lat() / 90.0;
  return {std::sin(lon), std::cos(lon), std::sin(lat), std::cos(lat)};
}

double haversine_km_deg(double lat1, double lon1, double lat2, double lon2) {
  const double p1 = lat1 * kDegToRad;
  const double p2 = lat2 * kDegToRad;
  const double s_lat = std::sin((p2 - p1) / 2.0);
  const double s_lon = std::sin((lon2 - lon1) * kDegToRad / 2.0);
  double h = s_lat * s_lat + std::cos(p1) * std::cos(p2) * s_lon * s_lon;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  return haversine_km_deg(a.lat(), a.lon(), b.lat(), b.lon());
}

std::vector<GeoPoint> sample_uniform_sphere(std::mt19937_64& rng,
                                            std::size_t n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<GeoPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lon = -180.0 + 360.0 * unit(rng);
    const double u = unit(rng);
    const double lat = std::asin(std::clamp(2.0 * u - 1.0, -1.0, 1.0)) / kDegToRad;
    out.emplace_back(lat, lon);
  }
  return out;
}

std::size_t GridSpec::n_rows() const {
  return static_cast<std::size_t>(std::ceil((lat_max - lat_min) / res_deg - 1e-9));
}

std::size_t GridSpec::n_cols() const {
  return static_cast<std::size_t>(std::ceil((lon_max - lon_min) / res_deg - 1e-9));
}

GeoPoint GridSpec::cell_center(std::size_t row, std::size_t col) const {
  const double lat = lat_max - (static_cast<double>(row) + 0.5) * res_deg;
  const double lon = lon_min + (static_cast<double>(col) + 0.5) * res_deg;
  return GeoPoint(std::clamp(lat, -90.0, 90.0), lon);
}

std::optional<std::size_t> GridSpec::locate(const GeoPoint& p) const {
  if (p.lat() < lat_min || p.lat() > lat_max) return std::nullopt;
  double lon = p.lon();
  if (lon < lon_min) lon += 360.0;
  if (lon < lon_min || lon > lon_max) return std::nullopt;
  const auto rows = n_rows();
  const auto cols = n_cols();
  auto r = static_cast<std::size_t>(std::floor((lat_max - p.lat()) / res_deg));
  auto c = static_cast<std::size_t>(std::floor((lon - lon_min) / res_deg));
  r = std::min(r, rows - 1);
  c = std::min(c, cols - 1);
  return r * cols + c;
}

std::vector<GeoPoint> GridSpec::centers() const {
  std::vector<GeoPoint> out;
  out.reserve(size());
  for (std::size_t r = 0; r < n_rows(); ++r) {
    for (std::size_t c = 0; c < n_cols(); ++c) out.push_back(cell_center(r, c));
  }
  return out;
}

void validate(const GridSpec& g) {
  const bool ok = std::isfinite(g.res_deg) && g.res_deg > 0 &&
                  g.lat_min >= -90.0 && g.lat_max <= 90.0 &&
                  g.lat_min < g.lat_max && g.lon_min >= -180.0 &&
                  g.lon_max <= 180.0 && g.lon_min < g.lon_max;
  if (!ok) throw Error(ErrorCode::kDomainError, "invalid grid bounds");
}

std::size_t RangeMask::positives() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1));
}

double RangeMask::coverage() const {
  return cells.empty() ? 0.0
                       : static_cast<double>(positives()) /
                             static_cast<double>(cells.size());
}

namespace {

struct PositiveCenters {
  std::vector<double> lat;
  std::vector<double> lon;
};

PositiveCenters positive_centers(const RangeMask& mask) {
  PositiveCenters out;
  for (std::size_t i = 0; i < mask.cells.size(); ++i) {
    if (mask.cells[i] == 0) continue;
    const GeoPoint c = mask.grid.cell_center(i);
    out.lat.push_back(c.lat());
    out.lon.push_back(c.lon());
  }
  if (out.lat.empty()) {
    throw Error(ErrorCode::kEmptyRange, "mask has no positive cell");
  }
  return out;
}

}  // namespace

double distance_to_range_km(const GeoPoint& p, const RangeMask& mask) {
  const auto targets = positive_centers(mask);
  if (const auto idx = mask.grid.locate(p); idx && mask.cells[*idx] != 0) {
    return 0.0;
  }
  const double lat = p.lat();
  const double lon = p.lon();
  double out = 0.0;
  kernels::serial::nearest_distance_km({{&lat, 1}, {&lon, 1}},
                                       {targets.lat, targets.lon}, {&out, 1});
  return out;
}

std::vector<double> distance_field_km(const RangeMask& mask) {
  const auto targets = positive_centers(mask);
  std::vector<double> lat;
  std::vector<double> lon;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < mask.cells.size(); ++i) {
    if (mask.cells[i] != 0) continue;
    const GeoPoint c = mask.grid.cell_center(i);
    lat.push_back(c.lat());
    lon.push_back(c.lon());
    index.push_back(i);
  }
  std::vector<double> near(index.size());
  kernels::nearest_distance_km({lat, lon}, {targets.lat, targets.lon}, near);
  std::vector<double> out(mask.cells.size(), 0.0);
  for (std::size_t i = 0; i < index.size(); ++i) out[index[i]] = near[i];
  return out;
}

nlohmann::json to_json(const GridSpec& g) {
  return json{{"lat_min", g.lat_min}, {"lat_max", g.lat_max},
              {"lon_min", g.lon_min}, {"lon_max", g.lon_max},
              {"res_deg", g.res_deg}, {"n_rows", g.n_rows()},
              {"n_cols", g.n_cols()}};
}

GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec g;
  g.lat_min = j.at("lat_min").get<double>();
  g.lat_max = j.at("lat_max").get<double>();
  g.lon_min = j.at("lon_min").get<double>();
  g.lon_max = j.at("lon_max").get<double>();
  g.res_deg = j.at("res_deg").get<double>();
  validate(g);
  if ((j.contains("n_rows") && j.at("n_rows").get<std::size_t>() != g.n_rows()) ||
      (j.contains("n_cols") && j.at("n_cols").get<std::size_t>() != g.n_cols())) {
    throw Error(ErrorCode::kCorruptManifest, "row/column counts disagree with bounds");
  }
  return g;
}

void save_mask(const RangeMask& mask, const std::filesystem::path& base) {
  if (mask.cells.size() != mask.grid.size()) {
    throw Error(ErrorCode::kGeometryMismatch, "mask cell count");
  }
  write_text(with_suffix(base, ".mask.json"), to_json(mask.grid).dump(2));
  std::ofstream out(with_suffix(base, ".mask.bin"), std::ios::binary);
  out.write(reinterpret_cast<const char*>(mask.cells.data()),
            static_cast<std::streamsize>(mask.cells.size()));
}

RangeMask load_mask(const std::filesystem::path& base) {
  RangeMask mask;
  mask.grid = parse_header(with_suffix(base, ".mask.json"));
  const auto bytes = read_bytes(with_suffix(base, ".mask.bin"));
  if (bytes.size() != mask.grid.size()) {
    throw Error(ErrorCode::kPayloadLengthMismatch,
                "expected " + std::to_string(mask.grid.size()) + " bytes, got " +
                    std::to_string(bytes.size()));
  }
  mask.cells.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const auto b = static_cast<std::uint8_t>(bytes[i]);
    if (b > 1) throw Error(ErrorCode::kCorruptManifest, "mask byte not 0/1");
    mask.cells[i] = b;
  }
  return mask;
}

void save_prediction(const PredictionGrid& grid,
                     const std::filesystem::path& base) {
  static_assert(std::endian::native == std::endian::little);
  if (grid.cells.size() != grid.grid.size()) {
    throw Error(ErrorCode::kGeometryMismatch, "prediction cell count");
  }
  write_text(with_suffix(base, ".grid.json"), to_json(grid.grid).dump(2));
  std::ofstream out(with_suffix(base, ".grid.bin"), std::ios::binary);
  out.write(reinterpret_cast<const char*>(grid.cells.data()),
            static_cast<std::streamsize>(grid.cells.size() * sizeof(float)));
}

PredictionGrid load_prediction(const std::filesystem::path& base) {
  PredictionGrid grid;
  grid.grid = parse_header(with_suffix(base, ".grid.json"));
  const auto bytes = read_bytes(with_suffix(base, ".grid.bin"));
  if (bytes.size() != grid.grid.size() * sizeof(float)) {
    throw Error(ErrorCode::kPayloadLengthMismatch, "prediction payload size");
  }
  grid.cells.resize(grid.grid.size());
  std::memcpy(grid.cells.data(), bytes.data(), bytes.size());
  return grid;
}

}  // namespace fsr::geo
