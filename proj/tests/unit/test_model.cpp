#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "fsr/checkpoint.hpp"
#include "fsr/error.hpp"
#include "fsr/model.hpp"

namespace fsr::model {
namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.embed_dim = 8;
  c.location_blocks = 1;
  c.heads = 2;
  c.ffn_dim = 16;
  c.encoder_layers = 2;
  c.text_dim = 12;
  c.image_dim = 6;
  c.adapter_hidden = 10;
  c.adapter_blocks = 1;
  c.decoder_hidden = 8;
  return c;
}

std::vector<geo::GeoPoint> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return geo::sample_uniform_sphere(rng, n);
}

TEST(ParameterCounts, DefaultComponents) {
  FsSinrModel<float> m(ModelConfig{}, 1);
  const auto c = m.counts();
  EXPECT_EQ(c.location_encoder, 527616u);
  EXPECT_EQ(c.species_decoder, 197376u);
  // Adapters and the transformer are reported only; see README.
  EXPECT_EQ(c.text_adapter, 3279616u);
  EXPECT_EQ(c.image_adapter, 1706752u);
  EXPECT_EQ(c.transformer, 2110208u);
  EXPECT_EQ(m.head.type_embeddings.value.rows(), kTokenTypes);
}

TEST(ParameterCounts, EncoderWithoutResidualBlocks) {
  ModelConfig cfg;
  cfg.location_blocks = 0;
  std::mt19937_64 rng(1);
  LocationEncoder<float> enc("e", cfg, rng);
  ParamList<float> p;
  enc.collect(p);
  EXPECT_EQ(nn::count_parameters(p), 4u * 256 + 256);
}

TEST(ParameterCounts, SinrClassifierHasOneColumnPerSpecies) {
  SinrModel<float> m(tiny_config(), {3, 9, 27}, 1);
  EXPECT_EQ(m.classifier.value.rows(), 8u);
  EXPECT_EQ(m.classifier.value.cols(), 3u);
  EXPECT_EQ(m.counts().classifier, 24u);
}

TEST(SinrForward, ZeroClassifierGivesOneHalf) {
  SinrModel<float> m(tiny_config(), {1, 2, 3}, 4);
  m.classifier.value.fill(0);
  for (float p : sinr_forward(geo::GeoPoint(12, -40), m)) EXPECT_EQ(p, 0.5f);
}

TEST(SinrForward, HandSetTwoSpeciesToy) {
  ModelConfig cfg = tiny_config();
  cfg.embed_dim = 2;
  cfg.location_blocks = 0;
  SinrModel<double> m(cfg, {10, 20}, 1);
  // f(x) = relu(enc(x)·A + b), A picks sin(lon) and cos(lat) scaled.
  m.encoder.input.weight.value = Tensor<double>(4, 2, {2, 0, 0, 0, 0, 0, 0, -1});
  m.encoder.input.bias.value = Tensor<double>(1, 2, {0.5, 0.25});
  m.classifier.value = Tensor<double>(2, 2, {1.0, -2.0, 3.0, 0.5});
  const geo::GeoPoint x(60, 30);
  const double f0 = std::max(0.0, 2 * std::sin(std::numbers::pi * 30 / 180) + 0.5);
  const double f1 = std::max(0.0, -std::cos(std::numbers::pi * 60 / 90) + 0.25);
  const double y0 = 1 / (1 + std::exp(-(f0 * 1.0 + f1 * 3.0)));
  const double y1 = 1 / (1 + std::exp(-(f0 * -2.0 + f1 * 0.5)));
  Tape<double> tape(false);
  const std::vector<geo::GeoPoint> xs = {x};
  const auto& out = tape.value(m.predict(tape, m.encoder.embed(tape, xs, {})));
  EXPECT_NEAR(out[0], y0, 1e-14);
  EXPECT_NEAR(out[1], y1, 1e-14);
}

TEST(SinrForward, ScalingAColumnKeepsItsSideOfOneHalf) {
  SinrModel<float> m(tiny_config(), {1, 2, 3, 4}, 8);
  for (const auto& x : random_points(50, 2)) {
    const auto before = sinr_forward(x, m);
    for (std::size_t r = 0; r < 8; ++r) m.classifier.value(r, 2) *= 3.5f;
    const auto after = sinr_forward(x, m);
    for (std::size_t r = 0; r < 8; ++r) m.classifier.value(r, 2) /= 3.5f;
    EXPECT_EQ(before[2] > 0.5f, after[2] > 0.5f);
    EXPECT_EQ(before[1], after[1]);
  }
}

TEST(PredictPresence, MatchesClassifierColumn) {
  SinrModel<float> m(tiny_config(), {1, 2}, 5);
  for (const auto& x : random_points(20, 3)) {
    const auto probs = sinr_forward(x, m);
    for (std::size_t j = 0; j < 2; ++j) {
      const float p = predict_presence(m.column(j), x, m.encoder);
      EXPECT_NEAR(p, probs[j], 1e-6);
      EXPECT_GT(p, 0.0f);
      EXPECT_LT(p, 1.0f);
    }
  }
}

TEST(PredictPresence, ZeroEmbeddingGivesOneHalf) {
  FsSinrModel<float> m(tiny_config(), 1);
  SpeciesEmbedding w{std::vector<float>(8, 0.0f), 0.0f};
  for (const auto& x : random_points(10, 4)) EXPECT_EQ(predict_presence(w, x, m.encoder), 0.5f);
}

ContextSet context_of(std::vector<geo::GeoPoint> locs) {
  ContextSet ctx;
  ctx.locations = std::move(locs);
  return ctx;
}

TEST(SpeciesEmbedding, InvariantToContextOrderAtDefaultSize) {
  FsSinrModel<float> m(ModelConfig{}, 3);
  std::mt19937_64 rng(10);
  auto locs = random_points(20, 5);
  const auto base = species_embedding(m, context_of(locs));
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(locs.begin(), locs.end(), rng);
    const auto shuffled = species_embedding(m, context_of(locs));
    for (std::size_t i = 0; i < base.weights.size(); ++i) {
      ASSERT_NEAR(base.weights[i], shuffled.weights[i], 1e-5);
    }
  }
}

TEST(SpeciesEmbedding, EmptyContextIsDeterministic) {
  FsSinrModel<float> m(tiny_config(), 3);
  const auto a = species_embedding(m, ContextSet{});
  const auto b = species_embedding(m, ContextSet{});
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.weights.size(), 8u);
}

TEST(SpeciesEmbedding, DuplicatingALocationChangesIt) {
  FsSinrModel<float> m(tiny_config(), 3);
  auto locs = random_points(4, 6);
  const auto a = species_embedding(m, context_of(locs));
  locs.push_back(locs[0]);
  const auto b = species_embedding(m, context_of(locs));
  EXPECT_NE(a.weights, b.weights);
}

TEST(SpeciesEmbedding, TextAndImageTokensAreUsedAndChecked) {
  FsSinrModel<float> m(tiny_config(), 3);
  ContextSet ctx = context_of(random_points(2, 7));
  const auto base = species_embedding(m, ctx);
  ctx.text_embedding = std::vector<float>(12, 0.3f);
  const auto with_text = species_embedding(m, ctx);
  EXPECT_NE(base.weights, with_text.weights);
  ctx.image_embedding = std::vector<float>(6, -0.2f);
  EXPECT_NE(with_text.weights, species_embedding(m, ctx).weights);
  ctx.image_embedding = std::vector<float>(7, 0.0f);
  try {
    species_embedding(m, ctx);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmbeddingDimMismatch);
  }
}

TEST(EmbedPoints, SerialAndParallelAgreeBitForBit) {
  FsSinrModel<float> m(tiny_config(), 2);
  const auto pts = random_points(2500, 8);
  EXPECT_EQ(serial::embed_points(m.encoder, pts), parallel::embed_points(m.encoder, pts));
}

TEST(ModelConfig, JsonRoundTripAndValidation) {
  const auto cfg = tiny_config();
  EXPECT_EQ(model_config_from_json(to_json(cfg)), cfg);
  auto j = to_json(cfg);
  j["heads"] = 3;
  EXPECT_THROW(model_config_from_json(j), Error);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("fsr_ckpt_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  static std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, FsSinrRoundTripIsBitExact) {
  FsSinrModel<float> m(tiny_config(), 42);
  save_checkpoint(m, dir_ / "a", 42, 3);
  auto loaded = load_fsinr(dir_ / "a");
  EXPECT_EQ(checksum(loaded.parameters()), checksum(m.parameters()));
  const ContextSet ctx = context_of(random_points(5, 9));
  EXPECT_EQ(species_embedding(loaded, ctx).weights, species_embedding(m, ctx).weights);
  save_checkpoint(loaded, dir_ / "b", 42, 3);
  EXPECT_EQ(slurp(dir_ / "a.bin"), slurp(dir_ / "b.bin"));
  const auto info = read_checkpoint_info(dir_ / "a");
  EXPECT_EQ(info.kind, "fsinr");
  EXPECT_EQ(info.seed, 42u);
  EXPECT_EQ(info.epoch, 3);
  EXPECT_EQ(info.config, tiny_config());
}

TEST_F(CheckpointTest, SinrRoundTripKeepsSpeciesIds) {
  SinrModel<float> m(tiny_config(), {5, 6, 7}, 1);
  save_checkpoint(m, dir_ / "s", 1, 0);
  auto loaded = load_sinr(dir_ / "s");
  EXPECT_EQ(loaded.species_ids(), m.species_ids());
  const geo::GeoPoint x(10, 10);
  EXPECT_EQ(sinr_forward(x, loaded), sinr_forward(x, m));
}

TEST_F(CheckpointTest, TruncatedPayload) {
  FsSinrModel<float> m(tiny_config(), 1);
  save_checkpoint(m, dir_ / "t", 1, 0);
  std::filesystem::resize_file(dir_ / "t.bin", std::filesystem::file_size(dir_ / "t.bin") - 4);
  try {
    load_fsinr(dir_ / "t");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPayloadLengthMismatch);
  }
}

TEST_F(CheckpointTest, MismatchedConfig) {
  FsSinrModel<float> m(tiny_config(), 1);
  save_checkpoint(m, dir_ / "c", 1, 0);
  ModelConfig other = tiny_config();
  other.ffn_dim = 32;
  FsSinrModel<float> target(other, 1);
  try {
    load_into(target, dir_ / "c");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigMismatch);
  }
  SinrModel<float> sinr(tiny_config(), {1}, 1);
  EXPECT_THROW(load_into(sinr, dir_ / "c"), Error);
}

TEST_F(CheckpointTest, CorruptManifest) {
  std::ofstream(dir_ / "x.json") << "{not json";
  std::ofstream(dir_ / "x.bin") << "";
  try {
    load_fsinr(dir_ / "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptManifest);
  }
}

}  // namespace
}  // namespace fsr::model
