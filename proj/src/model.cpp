#include "fsr/model.hpp"

#include <algorithm>
#include <cmath>

#include "fsr/error.hpp"

namespace fsr::model {

nlohmann::json to_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim},
          {"embed_dim", c.embed_dim},
          {"location_blocks", c.location_blocks},
          {"heads", c.heads},
          {"ffn_dim", c.ffn_dim},
          {"encoder_layers", c.encoder_layers},
          {"layer_norm_eps", c.layer_norm_eps},
          {"text_dim", c.text_dim},
          {"image_dim", c.image_dim},
          {"adapter_hidden", c.adapter_hidden},
          {"adapter_blocks", c.adapter_blocks},
          {"decoder_hidden", c.decoder_hidden}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  auto read = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  read("input_dim", c.input_dim);
  read("embed_dim", c.embed_dim);
  read("location_blocks", c.location_blocks);
  read("heads", c.heads);
  read("ffn_dim", c.ffn_dim);
  read("encoder_layers", c.encoder_layers);
  read("layer_norm_eps", c.layer_norm_eps);
  read("text_dim", c.text_dim);
  read("image_dim", c.image_dim);
  read("adapter_hidden", c.adapter_hidden);
  read("adapter_blocks", c.adapter_blocks);
  read("decoder_hidden", c.decoder_hidden);
  if (c.input_dim != 4) {
    throw Error(ErrorCode::kConfigMismatch, "input_dim must be 4");
  }
  if (c.heads == 0 || c.embed_dim % c.heads != 0) {
    throw Error(ErrorCode::kConfigMismatch, "embed_dim not divisible by heads");
  }
  return c;
}

nlohmann::json to_json(const ParameterCounts& c) {
  return {{"location_encoder", c.location_encoder},
          {"text_adapter", c.text_adapter},
          {"image_adapter", c.image_adapter},
          {"transformer", c.transformer},
          {"species_decoder", c.species_decoder},
          {"classifier", c.classifier},
          {"total", c.total}};
}

template <typename T>
Tensor<T> encode_inputs(std::span<const geo::GeoPoint> points) {
  Tensor<T> out(points.size(), 4);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto e = geo::encode_location(points[i]);
    for (std::size_t j = 0; j < 4; ++j) out(i, j) = static_cast<T>(e[j]);
  }
  return out;
}

template <typename T>
LocationEncoder<T>::LocationEncoder(const std::string& name,
                                    const ModelConfig& cfg,
                                    std::mt19937_64& rng)
    : input(name + ".input", cfg.input_dim, cfg.embed_dim, rng) {
  for (std::size_t b = 0; b < cfg.location_blocks; ++b) {
    blocks.emplace_back(name + ".block" + std::to_string(b), cfg.embed_dim, rng);
  }
}

template <typename T>
Var LocationEncoder<T>::forward(Tape<T>& tape, Var encoded, const Dropout& drop) {
  Var h = tape.relu(input.forward(tape, encoded));
  for (auto& block : blocks) h = block.forward(tape, h, drop);
  return h;
}

template <typename T>
Var LocationEncoder<T>::embed(Tape<T>& tape, std::span<const geo::GeoPoint> points,
                              const Dropout& drop) {
  return forward(tape, tape.constant(encode_inputs<T>(points)), drop);
}

template <typename T>
void LocationEncoder<T>::collect(ParamList<T>& out) {
  input.collect(out);
  for (auto& b : blocks) b.collect(out);
}

template <typename T>
TokenAdapter<T>::TokenAdapter(const std::string& name, std::size_t in,
                              const ModelConfig& cfg, std::mt19937_64& rng)
    : input(name + ".input", in, cfg.adapter_hidden, rng) {
  for (std::size_t b = 0; b < cfg.adapter_blocks; ++b) {
    blocks.emplace_back(name + ".block" + std::to_string(b), cfg.adapter_hidden, rng);
  }
  output = nn::Linear<T>(name + ".output", cfg.adapter_hidden, cfg.embed_dim, rng);
}

template <typename T>
Var TokenAdapter<T>::forward(Tape<T>& tape, Var x, const Dropout& drop) {
  Var h = tape.relu(input.forward(tape, x));
  for (auto& block : blocks) h = block.forward(tape, h, drop);
  return output.forward(tape, h);
}

template <typename T>
void TokenAdapter<T>::collect(ParamList<T>& out) {
  input.collect(out);
  for (auto& b : blocks) b.collect(out);
  output.collect(out);
}

template <typename T>
SpeciesDecoder<T>::SpeciesDecoder(const std::string& name, const ModelConfig& cfg,
                                  std::mt19937_64& rng)
    : first(name + ".first", cfg.embed_dim, cfg.decoder_hidden, rng),
      second(name + ".second", cfg.decoder_hidden, cfg.decoder_hidden, rng),
      third(name + ".third", cfg.decoder_hidden, cfg.embed_dim, rng) {}

template <typename T>
Var SpeciesDecoder<T>::forward(Tape<T>& tape, Var x) {
  Var h = tape.relu(first.forward(tape, x));
  h = tape.relu(second.forward(tape, h));
  return third.forward(tape, h);
}

template <typename T>
void SpeciesDecoder<T>::collect(ParamList<T>& out) {
  first.collect(out);
  second.collect(out);
  third.collect(out);
}

template <typename T>
FsSinrHead<T>::FsSinrHead(const std::string& name, const ModelConfig& cfg,
                          std::mt19937_64& rng)
    : type_embeddings(name + ".type_embeddings",
                      nn::normal_init<T>(kTokenTypes, cfg.embed_dim, 1.0, rng)),
      cls_token(name + ".cls", nn::normal_init<T>(1, cfg.embed_dim, 1.0, rng)),
      reg_token(name + ".reg", nn::normal_init<T>(1, cfg.embed_dim, 1.0, rng)) {
  for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
    layers.emplace_back(name + ".layer" + std::to_string(l), cfg.embed_dim,
                        cfg.heads, cfg.ffn_dim, cfg.layer_norm_eps, rng);
  }
  decoder = SpeciesDecoder<T>(name + ".decoder", cfg, rng);
}

template <typename T>
void FsSinrHead<T>::collect_transformer(ParamList<T>& out) {
  out.push_back(&type_embeddings);
  out.push_back(&cls_token);
  out.push_back(&reg_token);
  for (auto& l : layers) l.collect(out);
}

template <typename T>
void FsSinrHead<T>::collect(ParamList<T>& out) {
  collect_transformer(out);
  decoder.collect(out);
}

template <typename T>
FsSinrModel<T>::FsSinrModel(const ModelConfig& cfg, std::uint64_t seed)
    : config_(cfg) {
  std::mt19937_64 rng(seed);
  encoder = LocationEncoder<T>("encoder", cfg, rng);
  text_adapter = TokenAdapter<T>("text_adapter", cfg.text_dim, cfg, rng);
  image_adapter = TokenAdapter<T>("image_adapter", cfg.image_dim, cfg, rng);
  head = FsSinrHead<T>("head", cfg, rng);
}

namespace {

template <typename T>
Tensor<T> row_from(const std::vector<float>& v) {
  Tensor<T> t(1, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<T>(v[i]);
  return t;
}

}  // namespace

template <typename T>
Var FsSinrModel<T>::species_embedding(Tape<T>& tape, const ContextSet& ctx,
                                      const Dropout& drop) {
  if (ctx.text_embedding && ctx.text_embedding->size() != config_.text_dim) {
    throw Error(ErrorCode::kEmbeddingDimMismatch,
                "text embedding has " + std::to_string(ctx.text_embedding->size()) +
                    " values, expected " + std::to_string(config_.text_dim));
  }
  if (ctx.image_embedding && ctx.image_embedding->size() != config_.image_dim) {
    throw Error(ErrorCode::kEmbeddingDimMismatch,
                "image embedding has " + std::to_string(ctx.image_embedding->size()) +
                    " values, expected " + std::to_string(config_.image_dim));
  }
  const Var types = tape.parameter(head.type_embeddings);
  auto type_row = [&](TokenType t) {
    return tape.slice_rows(types, static_cast<std::size_t>(t), 1);
  };

  std::vector<Var> tokens;
  tokens.push_back(tape.add(tape.parameter(head.cls_token), type_row(TokenType::kCls)));
  tokens.push_back(tape.add(tape.parameter(head.reg_token), type_row(TokenType::kReg)));
  if (!ctx.locations.empty()) {
    const Var loc = encoder.embed(tape, ctx.locations, drop);
    tokens.push_back(tape.add_row(loc, type_row(TokenType::kLocation)));
  }
  if (ctx.text_embedding) {
    const Var t = text_adapter.forward(
        tape, tape.constant(row_from<T>(*ctx.text_embedding)), drop);
    tokens.push_back(tape.add(t, type_row(TokenType::kText)));
  }
  if (ctx.image_embedding) {
    const Var a = image_adapter.forward(
        tape, tape.constant(row_from<T>(*ctx.image_embedding)), drop);
    tokens.push_back(tape.add(a, type_row(TokenType::kImage)));
  }
  Var h = tape.concat_rows(tokens);
  for (auto& layer : head.layers) h = layer.forward(tape, h, drop);
  return head.decoder.forward(tape, tape.slice_rows(h, 0, 1));
}

template <typename T>
ParamList<T> FsSinrModel<T>::parameters() {
  ParamList<T> out;
  encoder.collect(out);
  text_adapter.collect(out);
  image_adapter.collect(out);
  head.collect(out);
  return out;
}

template <typename T>
ParameterCounts FsSinrModel<T>::counts() {
  ParameterCounts c;
  ParamList<T> p;
  encoder.collect(p);
  c.location_encoder = nn::count_parameters(p);
  p.clear();
  text_adapter.collect(p);
  c.text_adapter = nn::count_parameters(p);
  p.clear();
  image_adapter.collect(p);
  c.image_adapter = nn::count_parameters(p);
  p.clear();
  head.collect_transformer(p);
  c.transformer = nn::count_parameters(p);
  p.clear();
  head.decoder.collect(p);
  c.species_decoder = nn::count_parameters(p);
  c.total = c.location_encoder + c.text_adapter + c.image_adapter +
            c.transformer + c.species_decoder;
  return c;
}

template <typename T>
SinrModel<T>::SinrModel(const ModelConfig& cfg, std::vector<std::uint32_t> ids,
                        std::uint64_t seed)
    : config_(cfg), species_ids_(std::move(ids)) {
  std::mt19937_64 rng(seed);
  encoder = LocationEncoder<T>("encoder", cfg, rng);
  classifier = diff::Parameter<T>(
      "classifier",
      nn::uniform_fan_in<T>(cfg.embed_dim, species_ids_.size(), cfg.embed_dim, rng));
}

template <typename T>
Var SinrModel<T>::predict(Tape<T>& tape, Var location_embeddings) {
  return tape.sigmoid(tape.matmul(location_embeddings, tape.parameter(classifier)));
}

template <typename T>
SpeciesEmbedding SinrModel<T>::column(std::size_t j) const {
  SpeciesEmbedding w;
  w.weights.resize(classifier.value.rows());
  for (std::size_t r = 0; r < w.weights.size(); ++r) {
    w.weights[r] = static_cast<float>(classifier.value(r, j));
  }
  return w;
}

template <typename T>
ParamList<T> SinrModel<T>::parameters() {
  ParamList<T> out;
  encoder.collect(out);
  out.push_back(&classifier);
  return out;
}

template <typename T>
ParameterCounts SinrModel<T>::counts() {
  ParameterCounts c;
  ParamList<T> p;
  encoder.collect(p);
  c.location_encoder = nn::count_parameters(p);
  c.classifier = classifier.value.size();
  c.total = c.location_encoder + c.classifier;
  return c;
}

float presence(std::span<const float> f, const SpeciesEmbedding& w) {
  double s = w.bias;
  for (std::size_t i = 0; i < f.size(); ++i) {
    s += static_cast<double>(f[i]) * static_cast<double>(w.weights[i]);
  }
  return static_cast<float>(1.0 / (1.0 + std::exp(-s)));
}

SpeciesEmbedding species_embedding(FsSinrModel<float>& model,
                                   const ContextSet& ctx) {
  Tape<float> tape(false);
  const Var w = model.species_embedding(tape, ctx, Dropout{});
  SpeciesEmbedding out;
  out.weights = tape.value(w).storage();
  return out;
}

namespace {

constexpr std::size_t kEmbedChunk = 1024;

void embed_chunk(LocationEncoder<float>& encoder,
                 std::span<const geo::GeoPoint> points, std::size_t begin,
                 Tensor<float>& out) {
  const std::size_t end = std::min(points.size(), begin + kEmbedChunk);
  Tape<float> tape(false);
  const Var h = encoder.embed(tape, points.subspan(begin, end - begin), Dropout{});
  const auto& v = tape.value(h);
  std::copy(v.data(), v.data() + v.size(), out.data() + begin * out.cols());
}

}  // namespace

namespace serial {
Tensor<float> embed_points(LocationEncoder<float>& encoder,
                           std::span<const geo::GeoPoint> points) {
  Tensor<float> out(points.size(), encoder.width());
  for (std::size_t b = 0; b < points.size(); b += kEmbedChunk) {
    embed_chunk(encoder, points, b, out);
  }
  return out;
}
}  // namespace serial

namespace parallel {
Tensor<float> embed_points(LocationEncoder<float>& encoder,
                           std::span<const geo::GeoPoint> points) {
  Tensor<float> out(points.size(), encoder.width());
  const auto chunks =
      static_cast<std::ptrdiff_t>((points.size() + kEmbedChunk - 1) / kEmbedChunk);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    embed_chunk(encoder, points, static_cast<std::size_t>(c) * kEmbedChunk, out);
  }
  return out;
}
}  // namespace parallel

Tensor<float> embed_points(LocationEncoder<float>& encoder,
                           std::span<const geo::GeoPoint> points) {
  if (points.size() > kEmbedChunk) return parallel::embed_points(encoder, points);
  return serial::embed_points(encoder, points);
}

float predict_presence(const SpeciesEmbedding& w, const geo::GeoPoint& x,
                       LocationEncoder<float>& encoder) {
  const auto f = serial::embed_points(encoder, std::span(&x, 1));
  return presence(f.span(), w);
}

std::vector<float> sinr_forward(const geo::GeoPoint& x, SinrModel<float>& model) {
  Tape<float> tape(false);
  const Var f = model.encoder.embed(tape, std::span(&x, 1), Dropout{});
  return tape.value(model.predict(tape, f)).storage();
}

template <typename To, typename From>
void copy_parameters(ParamList<To> dst, ParamList<From> src) {
  if (dst.size() != src.size()) {
    throw Error(ErrorCode::kConfigMismatch, "parameter lists differ in length");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->value.shape() != src[i]->value.shape() || dst[i]->name != src[i]->name) {
      throw Error(ErrorCode::kConfigMismatch, "parameter " + src[i]->name);
    }
    for (std::size_t k = 0; k < src[i]->value.size(); ++k) {
      dst[i]->value[k] = static_cast<To>(src[i]->value[k]);
    }
  }
}

template Tensor<float> encode_inputs<float>(std::span<const geo::GeoPoint>);
template Tensor<double> encode_inputs<double>(std::span<const geo::GeoPoint>);
template struct LocationEncoder<float>;
template struct LocationEncoder<double>;
template struct TokenAdapter<float>;
template struct TokenAdapter<double>;
template struct SpeciesDecoder<float>;
template struct SpeciesDecoder<double>;
template struct FsSinrHead<float>;
template struct FsSinrHead<double>;
template class FsSinrModel<float>;
template class FsSinrModel<double>;
template class SinrModel<float>;
template class SinrModel<double>;
template void copy_parameters<double, float>(ParamList<double>, ParamList<float>);
template void copy_parameters<float, double>(ParamList<float>, ParamList<double>);
template void copy_parameters<float, float>(ParamList<float>, ParamList<float>);

}  // namespace fsr::model
