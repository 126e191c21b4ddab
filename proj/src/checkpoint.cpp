#include "fsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fsr/error.hpp"
#include "fsr/hash.hpp"

namespace fsr::model {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

std::filesystem::path suffixed(const std::filesystem::path& base, const char* s) {
  return std::filesystem::path(base.string() + s);
}

void write_checkpoint(const std::filesystem::path& base, const std::string& kind,
                      const ModelConfig& config, const ParamList<float>& params,
                      std::uint64_t seed, int epoch,
                      const std::vector<std::uint32_t>& species_ids) {
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto* p : params) {
    tensors.push_back({{"name", p->name},
                       {"shape", {p->value.rows(), p->value.cols()}},
                       {"offset", offset}});
    offset += p->value.size() * sizeof(float);
  }
  json manifest = {{"format", "fsr-checkpoint"}, {"version", 1},
                   {"kind", kind},              {"config", to_json(config)},
                   {"seed", seed},              {"epoch", epoch},
                   {"tensors", tensors}};
  if (!species_ids.empty()) manifest["species_ids"] = species_ids;

  std::ofstream js(suffixed(base, ".json"));
  if (!js) throw Error(ErrorCode::kIoError, "cannot write " + base.string() + ".json");
  js << manifest.dump(2) << '\n';
  std::ofstream bin(suffixed(base, ".bin"), std::ios::binary);
  if (!bin) throw Error(ErrorCode::kIoError, "cannot write " + base.string() + ".bin");
  for (const auto* p : params) {
    bin.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
}

json read_manifest(const std::filesystem::path& base) {
  std::ifstream in(suffixed(base, ".json"));
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + base.string() + ".json");
  try {
    json j = json::parse(in);
    if (j.value("format", "") != "fsr-checkpoint" || !j.contains("tensors") ||
        !j.contains("config") || !j.contains("kind")) {
      throw Error(ErrorCode::kCorruptManifest, "missing checkpoint keys");
    }
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptManifest, e.what());
  }
}

void fill_params(const json& manifest, const std::filesystem::path& base,
                 const ParamList<float>& params) {
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != params.size()) {
    throw Error(ErrorCode::kConfigMismatch,
                "checkpoint has " + std::to_string(tensors.size()) +
                    " tensors, model has " + std::to_string(params.size()));
  }
  std::size_t expected = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    const auto shape = t.at("shape").get<std::vector<std::size_t>>();
    if (t.at("name").get<std::string>() != params[i]->name || shape.size() != 2 ||
        shape[0] != params[i]->value.rows() || shape[1] != params[i]->value.cols()) {
      throw Error(ErrorCode::kConfigMismatch, "tensor " + params[i]->name);
    }
    if (t.at("offset").get<std::size_t>() != expected) {
      throw Error(ErrorCode::kCorruptManifest, "offset of " + params[i]->name);
    }
    expected += params[i]->value.size() * sizeof(float);
  }
  std::ifstream bin(suffixed(base, ".bin"), std::ios::binary);
  if (!bin) throw Error(ErrorCode::kIoError, "cannot open " + base.string() + ".bin");
  const std::vector<char> bytes{std::istreambuf_iterator<char>(bin),
                                std::istreambuf_iterator<char>()};
  if (bytes.size() != expected) {
    throw Error(ErrorCode::kPayloadLengthMismatch,
                "payload has " + std::to_string(bytes.size()) + " bytes, manifest needs " +
                    std::to_string(expected));
  }
  std::size_t offset = 0;
  for (auto* p : params) {
    const std::size_t n = p->value.size() * sizeof(float);
    std::memcpy(p->value.data(), bytes.data() + offset, n);
    offset += n;
    p->zero_grad();
  }
}

CheckpointInfo info_from(const json& j) {
  CheckpointInfo info;
  try {
    info.kind = j.at("kind").get<std::string>();
    info.config = model_config_from_json(j.at("config"));
    info.seed = j.value("seed", std::uint64_t{0});
    info.epoch = j.value("epoch", 0);
    if (j.contains("species_ids")) {
      info.species_ids = j.at("species_ids").get<std::vector<std::uint32_t>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptManifest, e.what());
  }
  return info;
}

void expect_kind(const CheckpointInfo& info, const char* kind) {
  if (info.kind != kind) {
    throw Error(ErrorCode::kConfigMismatch,
                "checkpoint kind '" + info.kind + "', expected '" + kind + "'");
  }
}

}  // namespace

void save_checkpoint(FsSinrModel<float>& model, const std::filesystem::path& base,
                     std::uint64_t seed, int epoch) {
  write_checkpoint(base, "fsinr", model.config(), model.parameters(), seed, epoch, {});
}

void save_checkpoint(SinrModel<float>& model, const std::filesystem::path& base,
                     std::uint64_t seed, int epoch) {
  write_checkpoint(base, "sinr", model.config(), model.parameters(), seed, epoch,
                   model.species_ids());
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& base) {
  return info_from(read_manifest(base));
}

void load_into(FsSinrModel<float>& model, const std::filesystem::path& base) {
  const json manifest = read_manifest(base);
  const auto info = info_from(manifest);
  expect_kind(info, "fsinr");
  if (!(info.config == model.config())) {
    throw Error(ErrorCode::kConfigMismatch, "model config differs from checkpoint");
  }
  fill_params(manifest, base, model.parameters());
}

void load_into(SinrModel<float>& model, const std::filesystem::path& base) {
  const json manifest = read_manifest(base);
  const auto info = info_from(manifest);
  expect_kind(info, "sinr");
  if (!(info.config == model.config()) || info.species_ids != model.species_ids()) {
    throw Error(ErrorCode::kConfigMismatch, "model config differs from checkpoint");
  }
  fill_params(manifest, base, model.parameters());
}

FsSinrModel<float> load_fsinr(const std::filesystem::path& base) {
  const auto info = read_checkpoint_info(base);
  expect_kind(info, "fsinr");
  FsSinrModel<float> model(info.config, info.seed);
  load_into(model, base);
  return model;
}

SinrModel<float> load_sinr(const std::filesystem::path& base) {
  const auto info = read_checkpoint_info(base);
  expect_kind(info, "sinr");
  SinrModel<float> model(info.config, info.species_ids, info.seed);
  load_into(model, base);
  return model;
}

std::string checksum(const ParamList<float>& params) {
  std::uint64_t h = kFnvOffset;
  for (const auto* p : params) {
    h = fnv1a64(p->value.data(), p->value.size() * sizeof(float), h);
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace fsr::model
