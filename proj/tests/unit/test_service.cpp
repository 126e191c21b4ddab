#include <gtest/gtest.h>

#include <algorithm>
#include <thread>

#include "fsr/checkpoint.hpp"
#include "fsr/data.hpp"
#include "fsr/service.hpp"
#include "httplib.h"

namespace fsr::service {
namespace {

using nlohmann::json;

model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.embed_dim = 8;
  c.location_blocks = 1;
  c.heads = 2;
  c.ffn_dim = 16;
  c.encoder_layers = 1;
  c.text_dim = 12;
  c.image_dim = 6;
  c.adapter_hidden = 10;
  c.adapter_blocks = 1;
  c.decoder_hidden = 8;
  return c;
}

const geo::GridSpec kSmall{-10, 10, -20, 20, 2};

class ServiceTest : public ::testing::Test {
 protected:
  model::FsSinrModel<float> a{tiny_config(), 1};
  model::FsSinrModel<float> b{tiny_config(), 2};
  InferenceService single{{&a}, {{"small", kSmall}}};
  InferenceService pair{{&a, &b}, {{"small", kSmall}}};
};

json locations(std::size_t n) {
  json out = json::array();
  for (std::size_t i = 0; i < n; ++i) out.push_back({-5.0 + 0.2 * i, 3.0 * i - 60});
  return out;
}

TEST_F(ServiceTest, EmptyEmbedIsTheZeroShotPrior) {
  const auto r = single.embed("{}");
  ASSERT_EQ(r.status, 200);
  const auto want = model::species_embedding(a, {}).weights;
  EXPECT_EQ(r.body.at("embedding").get<std::vector<float>>(), want);
  EXPECT_EQ(single.embed("").body, r.body);
  EXPECT_EQ(single.embed(R"({"text": ""})").body, r.body);
  EXPECT_EQ(single.embed("{}").body, r.body);
}

TEST_F(ServiceTest, EmbedValidation) {
  EXPECT_EQ(single.embed(json{{"context_locations", locations(50)}}.dump()).status, 200);
  EXPECT_EQ(single.embed(json{{"context_locations", locations(51)}}.dump()).status, 413);
  EXPECT_EQ(single.embed(R"({"text_embedding": [1, 2, 3]})").status, 422);
  EXPECT_EQ(single.embed(json{{"image_embedding", std::vector<float>(7, 0.f)}}.dump()).status, 422);
  EXPECT_EQ(single.embed(json{{"image_embedding", std::vector<float>(6, 0.f)}}.dump()).status, 200);
  EXPECT_EQ(single.embed("{not json").status, 400);
  EXPECT_EQ(single.embed("[1, 2]").status, 400);
  EXPECT_EQ(single.embed(R"({"context_locations": [[100, 0]]})").status, 400);
  EXPECT_EQ(single.embed(R"({"context_locations": [[1]]})").status, 400);
  EXPECT_EQ(single.embed(json{{"text", "x"}, {"text_embedding", std::vector<float>(12)}}.dump()).status,
            400);
}

TEST_F(ServiceTest, TextIsRoutedThroughTheEncoder) {
  const auto r = single.embed(R"({"text": "wet lowland forest"})");
  ASSERT_EQ(r.status, 200);
  model::ContextSet ctx;
  ctx.text_embedding = data::stub_text_embedding("wet lowland forest", 12);
  EXPECT_EQ(r.body.at("embedding").get<std::vector<float>>(), model::species_embedding(a, ctx).weights);
}

TEST_F(ServiceTest, ZeroEmbeddingPredictsOneHalf) {
  const auto r = single.predict(json{{"embedding", std::vector<float>(8, 0.f)}, {"grid", "small"}}.dump());
  ASSERT_EQ(r.status, 200);
  const auto p = r.body.at("probabilities").get<std::vector<float>>();
  const auto& g = r.body.at("grid");
  EXPECT_EQ(p.size(), g.at("n_rows").get<std::size_t>() * g.at("n_cols").get<std::size_t>());
  for (float v : p) EXPECT_EQ(v, 0.5f);
}

TEST_F(ServiceTest, PermutedContextGivesTheSameGrid) {
  auto locs = locations(12);
  const auto r1 = single.predict(json{{"context", {{"context_locations", locs}}}}.dump());
  std::reverse(locs.begin(), locs.end());
  std::swap(locs[2], locs[7]);
  const auto r2 = single.predict(json{{"context", {{"context_locations", locs}}}}.dump());
  ASSERT_EQ(r1.status, 200);
  const auto p1 = r1.body.at("probabilities").get<std::vector<float>>();
  const auto p2 = r2.body.at("probabilities").get<std::vector<float>>();
  ASSERT_EQ(p1.size(), p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_NEAR(p1[i], p2[i], 1e-5);
}

TEST_F(ServiceTest, InlineContextMatchesEmbedThenPredict) {
  const json ctx{{"context_locations", locations(3)}, {"text", "dry hills"}};
  const auto emb = single.embed(ctx.dump()).body.at("embedding");
  const auto via_embedding = single.predict(json{{"embedding", emb}}.dump());
  const auto inline_ctx = single.predict(json{{"context", ctx}}.dump());
  EXPECT_EQ(via_embedding.body.at("probabilities"), inline_ctx.body.at("probabilities"));
}

TEST_F(ServiceTest, PredictValidation) {
  const json emb{{"embedding", std::vector<float>(8, 0.f)}};
  EXPECT_EQ(single.predict(json{{"embedding", std::vector<float>(8)}, {"grid", "nope"}}.dump()).status, 404);
  EXPECT_EQ(single.predict("{}").status, 400);
  EXPECT_EQ(single.predict(json{{"embedding", std::vector<float>(8)}, {"context", json::object()}}.dump()).status,
            400);
  EXPECT_EQ(single.predict(json{{"embedding", std::vector<float>(5)}}.dump()).status, 422);
  EXPECT_EQ(single.predict(json{{"embedding", std::vector<float>(8)}, {"threshold", 2}}.dump()).status, 400);
  EXPECT_EQ(single.predict(json{{"context", json::object()}, {"ensemble", true}}.dump()).status, 400);
  EXPECT_EQ(single.predict(json{{"embedding", std::vector<float>(8)}, {"grid", {{"res_deg", -1}}}}.dump()).status,
            400);
}

TEST_F(ServiceTest, ExplicitBoundsAndThreshold) {
  const json grid{{"lat_min", 0}, {"lat_max", 4}, {"lon_min", 0}, {"lon_max", 6}, {"res_deg", 2}};
  const auto r = single.predict(
      json{{"context", {{"context_locations", locations(2)}}}, {"grid", grid}, {"threshold", 0.5}}.dump());
  ASSERT_EQ(r.status, 200);
  const auto p = r.body.at("probabilities").get<std::vector<float>>();
  const auto bin = r.body.at("binary").get<std::vector<int>>();
  ASSERT_EQ(p.size(), 6u);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(bin[i], p[i] >= 0.5f ? 1 : 0);
}

TEST_F(ServiceTest, EnsembleReturnsMeanAndVariance) {
  const json req{{"context", {{"context_locations", locations(4)}}}, {"ensemble", true}};
  const auto r = pair.predict(req.dump());
  ASSERT_EQ(r.status, 200);
  const auto mean = r.body.at("probabilities").get<std::vector<float>>();
  const auto var = r.body.at("variance").get<std::vector<float>>();
  fewshot::CellCache ca(a.encoder, kSmall), cb(b.encoder, kSmall);
  model::ContextSet ctx;
  for (const auto& p : locations(4)) ctx.locations.emplace_back(p[0].get<double>(), p[1].get<double>());
  const auto ga = fewshot::feedforward_range(a, ctx, ca), gb = fewshot::feedforward_range(b, ctx, cb);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    EXPECT_NEAR(mean[i], 0.5f * (ga.cells[i] + gb.cells[i]), 1e-6);
    EXPECT_GE(var[i], 0.0f);
  }
}

TEST_F(ServiceTest, ModelInfoAndReadOnly) {
  const auto before = pair.checksum();
  const auto info = pair.model_info();
  ASSERT_EQ(info.status, 200);
  EXPECT_EQ(info.body.at("parameter_counts").at("location_encoder").get<std::size_t>(),
            a.counts().location_encoder);
  EXPECT_FALSE(info.body.at("presets").empty());
  EXPECT_EQ(info.body.at("members").get<std::size_t>(), 2u);
  pair.embed(json{{"context_locations", locations(20)}}.dump());
  pair.predict(json{{"context", {{"context_locations", locations(5)}}}, {"ensemble", true}}.dump());
  pair.predict("garbage");
  EXPECT_EQ(pair.checksum(), before);
  EXPECT_EQ(pair.model_info().body.at("checksum"), info.body.at("checksum"));
}

TEST(ServiceDefault, ReportsDefaultEncoderCount) {
  model::FsSinrModel<float> m(model::ModelConfig{}, 3);
  const InferenceService s({&m}, {{"tiny", geo::GridSpec{0, 2, 0, 2, 1}}});
  EXPECT_EQ(s.model_info().body.at("parameter_counts").at("location_encoder").get<std::size_t>(),
            527616u);
}

TEST_F(ServiceTest, ConcurrentIdenticalRequestsAgree) {
  const std::string body = json{{"context", {{"context_locations", locations(6)}, {"text", "coast"}}}}.dump();
  std::vector<std::string> out(4);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < out.size(); ++t) {
    threads.emplace_back([&, t] { out[t] = pair.predict(body).body.dump(); });
  }
  for (auto& t : threads) t.join();
  for (const auto& o : out) EXPECT_EQ(o, out[0]);
}

TEST_F(ServiceTest, HttpRoundTripWithCors) {
  httplib::Server server;
  register_routes(server, single);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  const auto info = client.Get("/api/model");
  ASSERT_TRUE(info);
  EXPECT_EQ(info->status, 200);
  EXPECT_EQ(info->get_header_value("Access-Control-Allow-Origin"), "*");
  const auto emb = client.Post("/api/embed", "{}", "application/json");
  ASSERT_TRUE(emb);
  EXPECT_EQ(emb->status, 200);
  EXPECT_EQ(json::parse(emb->body), single.embed("{}").body);
  const auto big = client.Post("/api/embed", json{{"context_locations", locations(51)}}.dump(),
                               "application/json");
  ASSERT_TRUE(big);
  EXPECT_EQ(big->status, 413);
  const auto pre = client.Options("/api/predict");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  server.stop();
  th.join();
}

}  // namespace
}  // namespace fsr::service
