#include "fsr/layers.hpp"

#include <cmath>

namespace fsr::nn {

template <typename T>
Tensor<T> uniform_fan_in(std::size_t rows, std::size_t cols, std::size_t fan_in,
                         std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor<T> normal_init(std::size_t rows, std::size_t cols, double stddev,
                      std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor<T> t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Linear<T>::Linear(const std::string& name, std::size_t in, std::size_t out,
                  std::mt19937_64& rng)
    : weight(name + ".weight", uniform_fan_in<T>(in, out, in, rng)),
      bias(name + ".bias", uniform_fan_in<T>(1, out, in, rng)) {}

template <typename T>
Var Linear<T>::forward(Tape<T>& tape, Var x) {
  return tape.linear(x, tape.parameter(weight), tape.parameter(bias));
}

template <typename T>
void Linear<T>::collect(ParamList<T>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

template <typename T>
ResidualBlock<T>::ResidualBlock(const std::string& name, std::size_t width,
                                std::mt19937_64& rng)
    : first(name + ".first", width, width, rng),
      second(name + ".second", width, width, rng) {}

template <typename T>
Var ResidualBlock<T>::forward(Tape<T>& tape, Var x, const Dropout& drop) {
  Var h = tape.relu(first.forward(tape, x));
  h = tape.relu(second.forward(tape, h));
  h = tape.dropout(h, static_cast<T>(drop.p), drop.rng);
  return tape.add(x, h);
}

template <typename T>
void ResidualBlock<T>::collect(ParamList<T>& out) {
  first.collect(out);
  second.collect(out);
}

template <typename T>
LayerNorm<T>::LayerNorm(const std::string& name, std::size_t width, double e)
    : gamma(name + ".gamma", Tensor<T>(1, width, T(1))),
      beta(name + ".beta", Tensor<T>(1, width, T(0))),
      eps(e) {}

template <typename T>
Var LayerNorm<T>::forward(Tape<T>& tape, Var x) {
  return tape.layer_norm_rows(x, tape.parameter(gamma), tape.parameter(beta),
                              static_cast<T>(eps));
}

template <typename T>
void LayerNorm<T>::collect(ParamList<T>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

template <typename T>
SelfAttention<T>::SelfAttention(const std::string& name, std::size_t width,
                                std::size_t h, std::mt19937_64& rng)
    : qkv(name + ".qkv", width, 3 * width, rng),
      out(name + ".out", width, width, rng),
      heads(h) {
  if (h == 0 || width % h != 0) {
    throw Error(ErrorCode::kShapeMismatch, "width must be divisible by heads");
  }
}

template <typename T>
Var SelfAttention<T>::forward(Tape<T>& tape, Var x, std::vector<Var>* weights) {
  const std::size_t width = out.in_features();
  if (tape.value(x).cols() != width) {
    throw Error(ErrorCode::kShapeMismatch, "attention input width");
  }
  const std::size_t head_dim = width / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
  const Var proj = qkv.forward(tape, x);
  std::vector<Var> per_head;
  per_head.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Var q = tape.slice_cols(proj, h * head_dim, head_dim);
    const Var k = tape.slice_cols(proj, width + h * head_dim, head_dim);
    const Var v = tape.slice_cols(proj, 2 * width + h * head_dim, head_dim);
    const Var attn = tape.softmax_rows(tape.scale(tape.matmul_nt(q, k), scale));
    if (weights != nullptr) weights->push_back(attn);
    per_head.push_back(tape.matmul(attn, v));
  }
  const Var merged = heads == 1 ? per_head.front() : tape.concat_cols(per_head);
  return out.forward(tape, merged);
}

template <typename T>
void SelfAttention<T>::collect(ParamList<T>& o) {
  qkv.collect(o);
  out.collect(o);
}

template <typename T>
EncoderLayer<T>::EncoderLayer(const std::string& name, std::size_t width,
                              std::size_t heads, std::size_t ffn_width,
                              double eps, std::mt19937_64& rng)
    : attn(name + ".attn", width, heads, rng),
      norm1(name + ".norm1", width, eps),
      ff1(name + ".ff1", width, ffn_width, rng),
      ff2(name + ".ff2", ffn_width, width, rng),
      norm2(name + ".norm2", width, eps) {}

template <typename T>
Var EncoderLayer<T>::forward(Tape<T>& tape, Var x, const Dropout& drop) {
  const auto p = static_cast<T>(drop.p);
  Var a = tape.dropout(attn.forward(tape, x), p, drop.rng);
  const Var y = norm1.forward(tape, tape.add(x, a));
  Var f = ff2.forward(tape, tape.relu(ff1.forward(tape, y)));
  f = tape.dropout(f, p, drop.rng);
  return norm2.forward(tape, tape.add(y, f));
}

template <typename T>
void EncoderLayer<T>::collect(ParamList<T>& out) {
  attn.collect(out);
  norm1.collect(out);
  ff1.collect(out);
  ff2.collect(out);
  norm2.collect(out);
}

#define FSR_INSTANTIATE(T)                                                    \
  template Tensor<T> uniform_fan_in<T>(std::size_t, std::size_t, std::size_t, \
                                       std::mt19937_64&);                     \
  template Tensor<T> normal_init<T>(std::size_t, std::size_t, double,         \
                                    std::mt19937_64&);                        \
  template struct Linear<T>;                                                  \
  template struct ResidualBlock<T>;                                           \
  template struct LayerNorm<T>;                                               \
  template struct SelfAttention<T>;                                           \
  template struct EncoderLayer<T>;
FSR_INSTANTIATE(float)
FSR_INSTANTIATE(double)
#undef FSR_INSTANTIATE

}  // namespace fsr::nn
