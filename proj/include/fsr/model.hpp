#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsr/geo.hpp"
#include "fsr/layers.hpp"
#include "json.hpp"

namespace fsr::model {

using diff::Tape;
using diff::Tensor;
using diff::Var;
using nn::Dropout;
using nn::ParamList;

struct ModelConfig {
  std::size_t input_dim = 4;
  std::size_t embed_dim = 256;
  std::size_t location_blocks = 4;
  std::size_t heads = 2;
  std::size_t ffn_dim = 512;
  std::size_t encoder_layers = 4;
  double layer_norm_eps = 1e-5;
  std::size_t text_dim = 4096;
  std::size_t image_dim = 1024;
  std::size_t adapter_hidden = 512;
  std::size_t adapter_blocks = 2;
  std::size_t decoder_hidden = 256;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Rows of the token-type table.
enum class TokenType : std::size_t {
  kLocation = 0,
  kText = 1,
  kImage = 2,
  kCls = 3,
  kReg = 4,
};
inline constexpr std::size_t kTokenTypes = 5;

// Few-shot conditioning input. Any part may be absent; an entirely empty
// set asks for the learned zero-shot prior.
struct ContextSet {
  std::vector<geo::GeoPoint> locations;
  std::optional<std::vector<float>> text_embedding;
  std::optional<std::vector<float>> image_embedding;

  bool empty() const {
    return locations.empty() && !text_embedding && !image_embedding;
  }
  std::size_t token_count() const {
    return locations.size() + (text_embedding ? 1 : 0) + (image_embedding ? 1 : 0);
  }
};

// Presence score at x is sigmoid(f(x)·weights + bias).
struct SpeciesEmbedding {
  std::vector<float> weights;
  float bias = 0.0f;
};

// n×4 periodic encodings of the points.
template <typename T>
Tensor<T> encode_inputs(std::span<const geo::GeoPoint> points);

template <typename T>
struct LocationEncoder {
  nn::Linear<T> input;
  std::vector<nn::ResidualBlock<T>> blocks;

  LocationEncoder() = default;
  LocationEncoder(const std::string& name, const ModelConfig& cfg,
                  std::mt19937_64& rng);

  std::size_t width() const { return input.out_features(); }
  Var forward(Tape<T>& tape, Var encoded, const Dropout& drop);
  Var embed(Tape<T>& tape, std::span<const geo::GeoPoint> points,
            const Dropout& drop);
  void collect(ParamList<T>& out);
};

// in -> hidden (+ReLU), residual blocks at hidden width, hidden -> out.
template <typename T>
struct TokenAdapter {
  nn::Linear<T> input;
  std::vector<nn::ResidualBlock<T>> blocks;
  nn::Linear<T> output;

  TokenAdapter() = default;
  TokenAdapter(const std::string& name, std::size_t in, const ModelConfig& cfg,
               std::mt19937_64& rng);

  std::size_t input_dim() const { return input.in_features(); }
  Var forward(Tape<T>& tape, Var x, const Dropout& drop);
  void collect(ParamList<T>& out);
};

// Affine, ReLU, affine, ReLU, affine.
template <typename T>
struct SpeciesDecoder {
  nn::Linear<T> first;
  nn::Linear<T> second;
  nn::Linear<T> third;

  SpeciesDecoder() = default;
  SpeciesDecoder(const std::string& name, const ModelConfig& cfg,
                 std::mt19937_64& rng);

  Var forward(Tape<T>& tape, Var x);
  void collect(ParamList<T>& out);
};

template <typename T>
struct FsSinrHead {
  diff::Parameter<T> type_embeddings;  // kTokenTypes × width
  diff::Parameter<T> cls_token;        // 1 × width
  diff::Parameter<T> reg_token;        // 1 × width
  std::vector<nn::EncoderLayer<T>> layers;
  SpeciesDecoder<T> decoder;

  FsSinrHead() = default;
  FsSinrHead(const std::string& name, const ModelConfig& cfg, std::mt19937_64& rng);

  void collect_transformer(ParamList<T>& out);
  void collect(ParamList<T>& out);
};

// Per-component learnable scalar counts.
struct ParameterCounts {
  std::size_t location_encoder = 0;
  std::size_t text_adapter = 0;
  std::size_t image_adapter = 0;
  std::size_t transformer = 0;  // token tables + encoder layers
  std::size_t species_decoder = 0;
  std::size_t classifier = 0;
  std::size_t total = 0;
};
nlohmann::json to_json(const ParameterCounts& c);

template <typename T>
class FsSinrModel {
 public:
  FsSinrModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // Builds the token set [CLS, REG, locations..., text?, image?], runs the
  // encoder stack and decodes the CLS output into a 1×width embedding.
  // Throws Error(kEmbeddingDimMismatch) for wrongly sized text/image vectors.
  Var species_embedding(Tape<T>& tape, const ContextSet& ctx, const Dropout& drop);

  ParamList<T> parameters();
  ParameterCounts counts();

  LocationEncoder<T> encoder;
  TokenAdapter<T> text_adapter;
  TokenAdapter<T> image_adapter;
  FsSinrHead<T> head;

 private:
  ModelConfig config_;
};

// SINR: shared location encoder plus a per-species linear classifier.
template <typename T>
class SinrModel {
 public:
  SinrModel(const ModelConfig& cfg, std::vector<std::uint32_t> species_ids,
            std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<std::uint32_t>& species_ids() const { return species_ids_; }
  std::size_t num_species() const { return species_ids_.size(); }

  // n×s presence probabilities sigmoid(f(x)·W).
  Var predict(Tape<T>& tape, Var location_embeddings);
  SpeciesEmbedding column(std::size_t j) const;

  ParamList<T> parameters();
  ParameterCounts counts();

  LocationEncoder<T> encoder;
  diff::Parameter<T> classifier;  // width × s

 private:
  ModelConfig config_;
  std::vector<std::uint32_t> species_ids_;
};

// Inference helpers over float models.
float presence(std::span<const float> location_embedding,
               const SpeciesEmbedding& w);
SpeciesEmbedding species_embedding(FsSinrModel<float>& model,
                                   const ContextSet& ctx);
// Location embeddings for many points, one row per point.
Tensor<float> embed_points(LocationEncoder<float>& encoder,
                           std::span<const geo::GeoPoint> points);
float predict_presence(const SpeciesEmbedding& w, const geo::GeoPoint& x,
                       LocationEncoder<float>& encoder);
std::vector<float> sinr_forward(const geo::GeoPoint& x, SinrModel<float>& model);

namespace serial {
Tensor<float> embed_points(LocationEncoder<float>& encoder,
                           std::span<const geo::GeoPoint> points);
}
namespace parallel {
Tensor<float> embed_points(LocationEncoder<float>& encoder,
                           std::span<const geo::GeoPoint> points);
}

// Copies parameter values between precisions (same config, same order).
template <typename To, typename From>
void copy_parameters(ParamList<To> dst, ParamList<From> src);

extern template class FsSinrModel<float>;
extern template class FsSinrModel<double>;
extern template class SinrModel<float>;
extern template class SinrModel<double>;

}  // namespace fsr::model
