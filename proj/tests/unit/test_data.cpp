#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "fsr/data.hpp"
#include "fsr/error.hpp"
#include "fsr/synth.hpp"

namespace fsr::data {
namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("fsr_data_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  void write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
  }
  std::filesystem::path dir_;
};

using Observations = TempDir;

TEST_F(Observations, HeaderOnlyGivesEmptyStore) {
  write("o.csv", "species_id,lat,lon\n");
  EXPECT_TRUE(load_observations(dir_ / "o.csv").empty());
}

TEST_F(Observations, OutOfRangeLatitudeReportsLine) {
  write("o.csv", "species_id,lat,lon\n1,10,20\n2,91,0\n");
  try {
    load_observations(dir_ / "o.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfRangeCoordinate);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST_F(Observations, MalformedRowsAreParseErrors) {
  for (const char* body : {"1,2\n", "x,1,2\n", "1,2,3,4\n", "1,abc,3\n"}) {
    write("o.csv", std::string("species_id,lat,lon\n") + body);
    try {
      load_observations(dir_ / "o.csv");
      FAIL() << body;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParseError) << body;
      EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
  }
  write("o.csv", "lat,lon\n");
  EXPECT_THROW(load_observations(dir_ / "o.csv"), Error);
}

TEST_F(Observations, RoundTripPreservesRecords) {
  ObservationStore s;
  s.add(3, geo::GeoPoint(1.0 / 3.0, -170.123456789));
  s.add(1, geo::GeoPoint(-89.999, 179.5));
  s.add(3, geo::GeoPoint(0.1, 0.2));
  save_observations(s, dir_ / "o.csv");
  const auto back = load_observations(dir_ / "o.csv");
  EXPECT_EQ(back.records(), s.records());
  EXPECT_EQ(back.indices_of(3), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(back.species(), (std::vector<std::uint32_t>{1, 3}));
  EXPECT_TRUE(back.indices_of(99).empty());
  EXPECT_EQ(s.subset({1}).size(), 1u);
}

TEST(StubText, DeterministicUnitNormAndEmptyIsZero) {
  const auto a = stub_text_embedding("Prefers field-3 HIGH near the coast");
  const auto b = stub_text_embedding("prefers field-3 high near the coast");
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), kStubTextDim);
  double n = 0;
  for (float v : a) n += double(v) * v;
  EXPECT_NEAR(n, 1.0, 1e-6);
  const auto z = stub_text_embedding("");
  EXPECT_TRUE(std::all_of(z.begin(), z.end(), [](float v) { return v == 0.0f; }));
}

TEST(StubText, UnrelatedWordsAreDissimilar) {
  const auto a = stub_text_embedding("desert");
  const auto b = stub_text_embedding("rainforest");
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += double(a[i]) * b[i];
  EXPECT_LT(dot, 0.5);
}

// Independent FNV-1a 64 for the pinned-hash check.
std::uint64_t fnv1a_reference(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
  return h;
}

TEST(StubText, FixedHashValues) {
  // Pins the hash so vectors agree across platforms and builds.
  const auto v = stub_text_embedding("desert");
  const auto it = std::find_if(v.begin(), v.end(), [](float x) { return x != 0.0f; });
  ASSERT_NE(it, v.end());
  const std::uint64_t h = fnv1a_reference("desert");
  EXPECT_EQ(static_cast<std::size_t>(it - v.begin()), h % kStubTextDim);
  EXPECT_EQ(*it, (h >> 63) ? -1.0f : 1.0f);
}

using EmbeddingFiles = TempDir;

TEST_F(EmbeddingFiles, RoundTripAndLookupOfUnknownSpecies) {
  std::map<std::uint32_t, std::vector<float>> vecs;
  for (std::uint32_t id : {4u, 8u, 15u}) {
    std::vector<float> v(4096);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(id) / (i + 1.0f);
    vecs[id] = v;
  }
  write_embedding_file(dir_ / "e", 4096, vecs);
  EXPECT_EQ(std::filesystem::file_size(dir_ / "e.bin"), 3u * 4096 * 4);
  const auto p = FileEmbeddingProvider::load(dir_ / "e");
  EXPECT_EQ(p.dim(), 4096u);
  for (const auto& [id, v] : vecs) EXPECT_EQ(p.lookup(id), v);
  EXPECT_FALSE(p.lookup(16).has_value());
}

TEST_F(EmbeddingFiles, ShortPayloadAndBadManifest) {
  write_embedding_file(dir_ / "e", 8, {{1, std::vector<float>(8, 1.0f)}});
  std::filesystem::resize_file(dir_ / "e.bin", 28);
  try {
    FileEmbeddingProvider::load(dir_ / "e");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPayloadLengthMismatch);
  }
  write("f.json", "{\"dim\": 8}");
  write("f.bin", "");
  try {
    FileEmbeddingProvider::load(dir_ / "f");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptManifest);
  }
}

WorldConfig small_world(std::uint64_t seed) {
  WorldConfig c;
  c.seed = seed;
  c.n_species = 10;
  c.obs_per_species = 50;
  c.grid = geo::GridSpec{-20, 20, -30, 30, 2.0};
  return c;
}

TEST(SyntheticWorld, SameSeedSameWorld) {
  const auto a = generate_synthetic_world(small_world(7));
  const auto b = generate_synthetic_world(small_world(7));
  EXPECT_EQ(a.observations.records(), b.observations.records());
  for (const auto& [id, m] : a.masks) EXPECT_EQ(m.cells, b.masks.at(id).cells);
  EXPECT_EQ(a.texts(), b.texts());
  const auto c = generate_synthetic_world(small_world(8));
  EXPECT_NE(a.observations.records(), c.observations.records());
}

TEST(SyntheticWorld, ObservationsLieInsideTheirRanges) {
  const auto w = generate_synthetic_world(small_world(3));
  EXPECT_EQ(w.observations.size(), 10u * 50);
  for (const auto& r : w.observations.records()) {
    const auto& m = w.masks.at(r.species_id);
    const auto idx = m.grid.locate(r.location);
    ASSERT_TRUE(idx.has_value());
    EXPECT_EQ(m.cells[*idx], 1);
  }
}

TEST(SyntheticWorld, CoverageWithinBoundsAndRangesAreSuperlevelSets) {
  const auto w = generate_synthetic_world(small_world(4));
  double mean = 0;
  for (const auto& s : w.species) {
    const auto& m = w.masks.at(s.id);
    EXPECT_GT(m.positives(), 0u);
    EXPECT_GE(m.coverage(), 0.02);
    EXPECT_LE(m.coverage(), 0.20);
    mean += m.coverage();
    for (std::size_t i = 0; i < m.cells.size(); i += 7) {
      EXPECT_EQ(m.cells[i] == 1, w.suitability(s, m.grid.cell_center(i)) >= s.tau);
    }
  }
  mean /= w.species.size();
  EXPECT_GE(mean, 0.02);
  EXPECT_LE(mean, 0.20);
}

TEST(SyntheticWorld, HoldoutIsDisjointAndTextsMentionRegions) {
  WorldConfig cfg = small_world(5);
  cfg.n_species = 32;
  const auto w = generate_synthetic_world(cfg);
  const auto train = w.train_ids();
  const auto hold = w.holdout_ids();
  EXPECT_EQ(hold.size(), 8u);
  EXPECT_EQ(train.size() + hold.size(), 32u);
  for (auto id : hold) EXPECT_EQ(std::count(train.begin(), train.end(), id), 0);
  for (const auto& s : w.species) EXPECT_NE(s.text.find("region-"), std::string::npos);
}

TEST(SyntheticWorld, RejectsBadConfig) {
  WorldConfig c = small_world(1);
  c.n_species = 1;
  EXPECT_THROW(generate_synthetic_world(c), Error);
  c = small_world(1);
  c.obs_per_species = 0;
  EXPECT_THROW(generate_synthetic_world(c), Error);
}

TEST(SyntheticWorld, ImpossibleCoverageIsDegenerate) {
  WorldConfig c = small_world(1);
  c.grid = geo::GridSpec{-2, 2, -2, 2, 2.0};  // 4 cells: coverage is a multiple of 0.25
  c.coverage_min = 0.3;
  c.coverage_max = 0.4;
  try {
    generate_synthetic_world(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateSpecies);
  }
}

using WorldFiles = TempDir;

TEST_F(WorldFiles, SaveLoadRoundTrip) {
  const auto w = generate_synthetic_world(small_world(9));
  save_world(w, dir_ / "world");
  const auto back = load_world(dir_ / "world");
  EXPECT_EQ(back.config, w.config);
  EXPECT_EQ(back.observations.records(), w.observations.records());
  EXPECT_EQ(back.texts(), w.texts());
  EXPECT_EQ(back.holdout_ids(), w.holdout_ids());
  for (const auto& [id, m] : w.masks) EXPECT_EQ(back.masks.at(id).cells, m.cells);
  const auto& s = back.species[2];
  const geo::GeoPoint x(1.5, 2.5);
  EXPECT_EQ(back.suitability(s, x), w.suitability(w.species[2], x));
}

}  // namespace
}  // namespace fsr::data
