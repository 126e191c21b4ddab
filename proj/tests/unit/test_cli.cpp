#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"

namespace fsr::cli {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run fsr(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("fsr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << nlohmann::json{
        {"world_config",
         {{"obs_per_species", 30},
          {"grid", {{"lat_min", -10}, {"lat_max", 10}, {"lon_min", -10}, {"lon_max", 10}, {"res_deg", 1}}}}},
        {"model_config",
         {{"embed_dim", 8}, {"ffn_dim", 16}, {"adapter_hidden", 8}, {"decoder_hidden", 8},
          {"encoder_layers", 1}, {"text_dim", 32}, {"image_dim", 4}}},
        {"train_config", {{"sinr_epochs", 1}, {"fsinr_epochs", 1}, {"batch_size", 16}}}};
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string p(const char* name) const { return (dir / name).string(); }
  fs::path dir;
};

TEST_F(CliTest, SynthIsByteIdenticalForAFixedSeed) {
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(fsr({"synth", "--seed", "5", "--species", "6", "--config", p("cfg.json"), "--out", p(out)}).code, 0);
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / fs::relative(e.path(), dir / "a"))) << e.path();
    ++files;
  }
  EXPECT_GT(files, 0u);
  ASSERT_EQ(fsr({"synth", "--seed", "6", "--species", "6", "--config", p("cfg.json"), "--out", p("c")}).code, 0);
  EXPECT_NE(slurp(dir / "a" / "observations.csv"), slurp(dir / "c" / "observations.csv"));
}

TEST_F(CliTest, UsageErrorsExitWithTwoAndNoSideEffects) {
  EXPECT_EQ(fsr({}).code, 2);
  EXPECT_EQ(fsr({"bogus"}).code, 2);
  EXPECT_EQ(fsr({"synth", "--out", p("x"), "--frobnicate"}).code, 2);
  EXPECT_FALSE(fs::exists(dir / "x"));
  EXPECT_EQ(fsr({"synth"}).code, 2);  // missing --out
  EXPECT_EQ(fsr({"pretrain", "--world", p("w"), "--out", p("s"), "--profile", "huge"}).code, 2);
  EXPECT_EQ(fsr({"eval", "--k", "one"}).code, 2);
  const auto help = fsr({"eval", "--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("--ensemble"), std::string::npos);
}

TEST_F(CliTest, DomainErrorsExitWithOne) {
  EXPECT_EQ(fsr({"inspect", "--model", p("missing")}).code, 1);
  EXPECT_EQ(fsr({"synth", "--species", "1", "--out", p("w")}).code, 1);
  std::ofstream(dir / "bad.json") << "[1, 2";
  EXPECT_EQ(fsr({"synth", "--config", p("bad.json"), "--out", p("w")}).code, 1);
}

TEST_F(CliTest, CommandLineOverridesConfigFile) {
  std::ofstream(dir / "flags.json") << R"({"species": 9, "seed": 2, "out": "ignored"})";
  ASSERT_EQ(fsr({"synth", "--config", p("flags.json"), "--species", "7", "--out", p("w")}).code, 0);
  const auto cfg = nlohmann::json::parse(slurp(dir / "w" / "world.json"));
  EXPECT_EQ(cfg.at("config").at("n_species").get<int>(), 7);
  EXPECT_EQ(cfg.at("config").at("seed").get<int>(), 2);
  EXPECT_FALSE(fs::exists("ignored"));
}

TEST_F(CliTest, EndToEndOnATinyWorld) {
  const std::string cfg = p("cfg.json");
  ASSERT_EQ(fsr({"synth", "--seed", "1", "--species", "6", "--config", cfg, "--out", p("w")}).code, 0);
  ASSERT_EQ(fsr({"pretrain", "--world", p("w"), "--seed", "1", "--config", cfg, "--out", p("s")}).code, 0);
  for (const char* seed : {"1", "2"}) {
    const auto r = fsr({"train", "--world", p("w"), "--model", p("s"), "--seed", seed, "--config", cfg,
                        "--out", p(seed[0] == '1' ? "f1" : "f2")});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto info = nlohmann::json::parse(fsr({"inspect", "--model", p("f1")}).out);
  EXPECT_EQ(info.at("kind"), "fsinr");
  EXPECT_EQ(info.at("config").at("embed_dim").get<int>(), 8);

  const auto r = fsr({"eval", "--world", p("w"), "--model", p("f1"), "--sinr", p("s"), "--k", "0,2",
                      "--seeds", "2", "--h", "4.5", "--ensemble", p("f1") + "," + p("f2"), "--out", p("r")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(slurp(dir / "r" / "report.json"));
  EXPECT_FALSE(report.at("rows").empty());
  EXPECT_FALSE(report.at("ensemble").empty());
  std::ifstream csv(dir / "r" / "fsinr.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "species_id,k,seed,ap,weighted_ap_h9,weighted_ap_h99,weighted_ap_h4.5");
  for (const char* m : {"fsinr_text", "prototype", "active", "logreg"}) {
    EXPECT_TRUE(fs::exists(dir / "r" / (std::string(m) + ".csv"))) << m;
  }
}

}  // namespace
}  // namespace fsr::cli
