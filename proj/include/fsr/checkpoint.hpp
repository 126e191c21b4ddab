#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "fsr/model.hpp"

namespace fsr::model {

// A checkpoint at base path P is two files: `P.json` (manifest: tensor
// name/shape/byte offset, model config, seed, epoch) and `P.bin`
// (little-endian float32 values in manifest order).
struct CheckpointInfo {
  std::string kind;  // "fsinr" or "sinr"
  ModelConfig config;
  std::uint64_t seed = 0;
  int epoch = 0;
  std::vector<std::uint32_t> species_ids;  // SINR classifier columns
};

void save_checkpoint(FsSinrModel<float>& model, const std::filesystem::path& base,
                     std::uint64_t seed, int epoch);
void save_checkpoint(SinrModel<float>& model, const std::filesystem::path& base,
                     std::uint64_t seed, int epoch);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& base);

FsSinrModel<float> load_fsinr(const std::filesystem::path& base);
SinrModel<float> load_sinr(const std::filesystem::path& base);

// Loads tensors into an existing model; throws Error(kConfigMismatch) when
// the manifest config or tensor set differs from the model's.
void load_into(FsSinrModel<float>& model, const std::filesystem::path& base);
void load_into(SinrModel<float>& model, const std::filesystem::path& base);

// FNV-1a 64 over all parameter bytes in order, as 16 hex digits.
std::string checksum(const ParamList<float>& params);

}  // namespace fsr::model
