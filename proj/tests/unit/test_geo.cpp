#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "fsr/error.hpp"
#include "fsr/geo.hpp"

namespace fsr::geo {
namespace {

TEST(EncodeLocation, Origin) {
  const auto e = encode_location(GeoPoint(0, 0));
  EXPECT_DOUBLE_EQ(e[0], 0.0);
  EXPECT_DOUBLE_EQ(e[1], 1.0);
  EXPECT_DOUBLE_EQ(e[2], 0.0);
  EXPECT_DOUBLE_EQ(e[3], 1.0);
}

TEST(EncodeLocation, QuarterAndHalfTurns) {
  const auto e = encode_location(GeoPoint(90, -90));
  EXPECT_NEAR(e[0], -1.0, 1e-15);
  EXPECT_NEAR(e[1], 0.0, 1e-15);
  EXPECT_NEAR(e[2], 0.0, 1e-15);
  EXPECT_NEAR(e[3], -1.0, 1e-15);
}

TEST(EncodeLocation, DateLine) {
  const auto e = encode_location(GeoPoint(0, 180));
  EXPECT_LE(std::abs(e[0]), 1e-12);
  EXPECT_DOUBLE_EQ(e[1], -1.0);
  EXPECT_DOUBLE_EQ(e[2], 0.0);
  EXPECT_DOUBLE_EQ(e[3], 1.0);
}

TEST(EncodeLocation, PeriodicInLongitudeAndOnUnitCircles) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180);
  for (int i = 0; i < 1000; ++i) {
    const double a = lat(rng), b = lon(rng);
    const auto e1 = encode_location(GeoPoint(a, b));
    const auto e2 = encode_location(GeoPoint(a, b - 360.0));
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(e1[k], e2[k], 1e-12);
    EXPECT_NEAR(e1[0] * e1[0] + e1[1] * e1[1], 1.0, 1e-6);
    EXPECT_NEAR(e1[2] * e1[2] + e1[3] * e1[3], 1.0, 1e-6);
  }
}

TEST(GeoPoint, RejectsOutOfRangeLatitude) {
  try {
    GeoPoint(91, 0);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfRangeCoordinate);
  }
  EXPECT_THROW(GeoPoint(std::nan(""), 0), Error);
}

TEST(GeoPoint, NormalizesLongitude) {
  EXPECT_DOUBLE_EQ(GeoPoint(0, 180).lon(), -180.0);
  EXPECT_DOUBLE_EQ(GeoPoint(0, 190).lon(), -170.0);
  EXPECT_DOUBLE_EQ(GeoPoint(0, -540).lon(), -180.0);
  EXPECT_DOUBLE_EQ(GeoPoint(0, 359.5).lon(), -0.5);
}

TEST(Haversine, Identity) {
  EXPECT_EQ(haversine_km(GeoPoint(12.5, 33), GeoPoint(12.5, 33)), 0.0);
}

TEST(Haversine, AntipodalMatchesConstant) {
  EXPECT_NEAR(haversine_km(GeoPoint(0, 0), GeoPoint(0, 180)), 20037.5, 0.1);
  EXPECT_NEAR(haversine_km(GeoPoint(90, 0), GeoPoint(-90, 0)), 20037.5, 0.1);
}

TEST(Haversine, QuarterCircumference) {
  EXPECT_NEAR(haversine_km(GeoPoint(0, 0), GeoPoint(0, 90)), kAntipodalKm / 2, 0.1);
}

TEST(Haversine, SymmetricAndTriangleInequality) {
  std::mt19937_64 rng(5);
  const auto pts = sample_uniform_sphere(rng, 600);
  for (std::size_t i = 0; i + 2 < pts.size(); i += 3) {
    const double ab = haversine_km(pts[i], pts[i + 1]);
    const double ba = haversine_km(pts[i + 1], pts[i]);
    const double bc = haversine_km(pts[i + 1], pts[i + 2]);
    const double ac = haversine_km(pts[i], pts[i + 2]);
    EXPECT_EQ(ab, ba);
    EXPECT_LE(ac, (ab + bc) * (1 + 1e-9));
  }
}

TEST(Grid, CellCountsUseCeiling) {
  GridSpec g{-10, 10, 0, 25, 2.0};
  EXPECT_EQ(g.n_rows(), 10u);
  EXPECT_EQ(g.n_cols(), 13u);
  EXPECT_EQ(g.size(), 130u);
  const GridSpec global{};
  EXPECT_EQ(global.size(), 64800u);
}

TEST(Grid, LocateAgreesWithCellCenters) {
  GridSpec g{-30, 30, -45, 45, 1.0};
  for (std::size_t i = 0; i < g.size(); i += 7) {
    EXPECT_EQ(g.locate(g.cell_center(i)), i);
  }
  EXPECT_FALSE(g.locate(GeoPoint(50, 0)).has_value());
  EXPECT_EQ(g.cell_center(0).lat(), 29.5);
  EXPECT_EQ(g.cell_center(0).lon(), -44.5);
}

RangeMask single_cell_at_origin() {
  RangeMask m;
  m.grid = GridSpec{-1, 1, -1, 1, 2.0};
  m.cells = {1};
  return m;
}

TEST(DistanceToRange, InsidePositiveCellIsZero) {
  EXPECT_EQ(distance_to_range_km(GeoPoint(0.3, -0.7), single_cell_at_origin()), 0.0);
}

TEST(DistanceToRange, SingleCellQuarterTurnAway) {
  // The only center is (0,0), so the haversine oracle applies with no slack.
  EXPECT_NEAR(distance_to_range_km(GeoPoint(0, 90), single_cell_at_origin()),
              10018.75, 0.1);
}

TEST(DistanceToRange, AllPositiveMaskIsZeroEverywhere) {
  RangeMask m;
  m.grid = GridSpec{-90, 90, -180, 180, 10.0};
  m.cells.assign(m.grid.size(), 1);
  std::mt19937_64 rng(3);
  for (const auto& p : sample_uniform_sphere(rng, 200)) {
    EXPECT_EQ(distance_to_range_km(p, m), 0.0);
  }
}

TEST(DistanceToRange, EmptyMaskThrows) {
  RangeMask m;
  m.grid = GridSpec{-1, 1, -1, 1, 1.0};
  m.cells.assign(4, 0);
  try {
    distance_to_range_km(GeoPoint(0, 0), m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyRange);
  }
}

TEST(DistanceToRange, ZeroExactlyInsidePositiveCells) {
  std::mt19937_64 rng(21);
  RangeMask m;
  m.grid = GridSpec{-20, 20, -30, 30, 2.0};
  m.cells.resize(m.grid.size());
  std::bernoulli_distribution coin(0.1);
  for (auto& c : m.cells) c = coin(rng) ? 1 : 0;
  m.cells[0] = 1;
  std::uniform_real_distribution<double> lat(-25, 25), lon(-35, 35);
  for (int i = 0; i < 500; ++i) {
    const GeoPoint p(lat(rng), lon(rng));
    const auto idx = m.grid.locate(p);
    const bool inside = idx && m.cells[*idx] == 1;
    EXPECT_EQ(distance_to_range_km(p, m) == 0.0, inside);
  }
}

TEST(DistanceField, MatchesPointwiseQuery) {
  RangeMask m;
  m.grid = GridSpec{-10, 10, -10, 10, 1.0};
  m.cells.assign(m.grid.size(), 0);
  m.cells[37] = 1;
  m.cells[250] = 1;
  const auto field = distance_field_km(m);
  for (std::size_t i = 0; i < field.size(); i += 13) {
    EXPECT_DOUBLE_EQ(field[i], distance_to_range_km(m.grid.cell_center(i), m));
  }
}

TEST(UniformSphere, EmptyRequest) {
  std::mt19937_64 rng(1);
  EXPECT_TRUE(sample_uniform_sphere(rng, 0).empty());
}

TEST(UniformSphere, Deterministic) {
  std::mt19937_64 a(99), b(99);
  EXPECT_EQ(sample_uniform_sphere(a, 50), sample_uniform_sphere(b, 50));
}

TEST(UniformSphere, PolarCapFractionAndLatitudeCdf) {
  std::mt19937_64 rng(2024);
  const std::size_t n = 100000;
  auto pts = sample_uniform_sphere(rng, n);
  const auto polar = std::count_if(pts.begin(), pts.end(),
                                   [](const GeoPoint& p) { return std::abs(p.lat()) > 60; });
  // Both caps above |lat| = 60 deg together cover 1 - sin 60 deg of the sphere.
  EXPECT_NEAR(static_cast<double>(polar) / n, 1.0 - std::sin(std::numbers::pi / 3.0), 0.01);

  std::vector<double> lats;
  for (const auto& p : pts) lats.push_back(p.lat());
  std::sort(lats.begin(), lats.end());
  double ks = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cdf = (1.0 + std::sin(lats[i] * std::numbers::pi / 180.0)) / 2.0;
    ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / n),
                   std::abs(cdf - static_cast<double>(i + 1) / n)});
  }
  EXPECT_LE(ks, 0.01);
  for (const auto& p : pts) {
    ASSERT_GE(p.lon(), -180.0);
    ASSERT_LT(p.lon(), 180.0);
  }
}

class MaskFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("fsr_geo_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(MaskFiles, RoundTripAndTruncation) {
  RangeMask m;
  m.grid = GridSpec{-5, 5, 10, 20, 0.5};
  m.cells.assign(m.grid.size(), 0);
  for (std::size_t i = 0; i < m.cells.size(); i += 3) m.cells[i] = 1;
  save_mask(m, dir_ / "sp");
  const auto back = load_mask(dir_ / "sp");
  EXPECT_EQ(back.grid, m.grid);
  EXPECT_EQ(back.cells, m.cells);

  std::filesystem::resize_file(dir_ / "sp.mask.bin", m.cells.size() - 1);
  try {
    load_mask(dir_ / "sp");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPayloadLengthMismatch);
  }
}

TEST_F(MaskFiles, PredictionRoundTripIsBitExact) {
  PredictionGrid g;
  g.grid = GridSpec{-2, 2, -3, 3, 1.0};
  for (std::size_t i = 0; i < g.grid.size(); ++i) g.cells.push_back(1.0f / (i + 3.0f));
  save_prediction(g, dir_ / "pred");
  const auto back = load_prediction(dir_ / "pred");
  EXPECT_EQ(back.cells, g.cells);
  std::ifstream header(dir_ / "pred.grid.json");
  std::string text((std::istreambuf_iterator<char>(header)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("\"n_cols\": 6"), std::string::npos);
}

}  // namespace
}  // namespace fsr::geo
