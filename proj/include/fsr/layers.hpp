#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "fsr/tape.hpp"

namespace fsr::nn {

using diff::Parameter;
using diff::Tape;
using diff::Tensor;
using diff::Var;

// Train-time dropout; rng == nullptr disables it.
struct Dropout {
  double p = 0.0;
  std::mt19937_64* rng = nullptr;

  bool active() const { return rng != nullptr && p > 0.0; }
};

template <typename T>
using ParamList = std::vector<Parameter<T>*>;

template <typename T>
std::size_t count_parameters(const ParamList<T>& params) {
  std::size_t total = 0;
  for (const auto* p : params) total += p->value.size();
  return total;
}

// Weight init shared by every affine map: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
Tensor<T> uniform_fan_in(std::size_t rows, std::size_t cols, std::size_t fan_in,
                         std::mt19937_64& rng);

template <typename T>
Tensor<T> normal_init(std::size_t rows, std::size_t cols, double stddev,
                      std::mt19937_64& rng);

// y = x·W + b with W stored in×out.
template <typename T>
struct Linear {
  Parameter<T> weight;
  Parameter<T> bias;

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out,
         std::mt19937_64& rng);

  std::size_t in_features() const { return weight.value.rows(); }
  std::size_t out_features() const { return weight.value.cols(); }
  Var forward(Tape<T>& tape, Var x);
  void collect(ParamList<T>& out);
};

// y = x + dropout(relu(L2(relu(L1(x)))))
template <typename T>
struct ResidualBlock {
  Linear<T> first;
  Linear<T> second;

  ResidualBlock() = default;
  ResidualBlock(const std::string& name, std::size_t width, std::mt19937_64& rng);

  Var forward(Tape<T>& tape, Var x, const Dropout& drop);
  void collect(ParamList<T>& out);
};

template <typename T>
struct LayerNorm {
  Parameter<T> gamma;
  Parameter<T> beta;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t width, double eps);

  Var forward(Tape<T>& tape, Var x);
  void collect(ParamList<T>& out);
};

// Multi-head self-attention without masks or positions, laid out like a
// fused QKV projection followed by an output projection.
template <typename T>
struct SelfAttention {
  Linear<T> qkv;
  Linear<T> out;
  std::size_t heads = 1;

  SelfAttention() = default;
  SelfAttention(const std::string& name, std::size_t width, std::size_t heads,
                std::mt19937_64& rng);

  // When `weights` is given, the per-head attention matrices are appended.
  Var forward(Tape<T>& tape, Var x, std::vector<Var>* weights = nullptr);
  void collect(ParamList<T>& out);
};

// Post-norm encoder layer:
//   y = LN1(x + dropout(attn(x)));  z = LN2(y + dropout(ff2(relu(ff1(y)))))
template <typename T>
struct EncoderLayer {
  SelfAttention<T> attn;
  LayerNorm<T> norm1;
  Linear<T> ff1;
  Linear<T> ff2;
  LayerNorm<T> norm2;

  EncoderLayer() = default;
  EncoderLayer(const std::string& name, std::size_t width, std::size_t heads,
               std::size_t ffn_width, double eps, std::mt19937_64& rng);

  Var forward(Tape<T>& tape, Var x, const Dropout& drop);
  void collect(ParamList<T>& out);
};

}  // namespace fsr::nn
