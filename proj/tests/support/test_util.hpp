#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fsr/tape.hpp"

namespace fsr::testing {

using diff::Tape;
using diff::Tensor;
using diff::Var;

template <typename T = double>
Tensor<T> random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                        double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor<T> t(rows, cols);
  for (auto& v : t.storage()) v = static_cast<T>(n(rng));
  return t;
}

using OpBuilder = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

// Largest relative gap between the tape gradient of sum(coeff ⊙ op(inputs))
// and its central difference, over every input coordinate.
inline double op_gradient_error(const OpBuilder& op, std::vector<Tensor<double>> inputs,
                                std::uint64_t seed, double step = 1e-6,
                                double floor = 1e-6) {
  std::mt19937_64 rng(seed);
  Tensor<double> coeff;
  auto evaluate = [&](const std::vector<Tensor<double>>& in, bool keep,
                      std::vector<Tensor<double>>* grads) {
    Tape<double> tape(keep);
    std::vector<Var> vars;
    for (const auto& t : in) vars.push_back(tape.variable(t));
    Var out = op(tape, vars);
    if (coeff.size() == 0) coeff = random_tensor(tape.value(out).rows(), tape.value(out).cols(), rng);
    Var loss = tape.weighted_sum(out, coeff);
    if (grads) {
      tape.backward(loss);
      for (Var v : vars) grads->push_back(tape.grad(v));
    }
    return tape.value(loss)[0];
  };
  std::vector<Tensor<double>> grads;
  evaluate(inputs, true, &grads);
  double worst = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      const double orig = inputs[t][i];
      inputs[t][i] = orig + step;
      const double up = evaluate(inputs, false, nullptr);
      inputs[t][i] = orig - step;
      const double down = evaluate(inputs, false, nullptr);
      inputs[t][i] = orig;
      const double fd = (up - down) / (2 * step);
      const double g = grads[t][i];
      worst = std::max(worst, std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), floor}));
    }
  }
  return worst;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

// Rows of t reordered so that out[i] = t[perm[i]].
template <typename T>
Tensor<T> permute_rows(const Tensor<T>& t, const std::vector<std::size_t>& perm) {
  Tensor<T> out(t.rows(), t.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::copy(t.row(perm[i]).begin(), t.row(perm[i]).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace fsr::testing
