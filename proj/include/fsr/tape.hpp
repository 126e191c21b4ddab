#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fsr/tensor.hpp"

namespace fsr::diff {

// A learnable tensor. `grad` is written only by Tape::accumulate_into_parameters.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}
  void zero_grad() { grad = Tensor<T>(value.rows(), value.cols()); }
};

template <typename T>
class Tape;

// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  std::uint32_t index() const noexcept { return index_; }
  bool valid() const noexcept { return owner_ != nullptr; }

 private:
  template <typename>
  friend class Tape;
  Var(const void* owner, std::uint32_t index) : owner_(owner), index_(index) {}
  const void* owner_ = nullptr;
  std::uint32_t index_ = 0;
};

// Records operations in execution order; backward() walks them in reverse,
// visiting each node once. A tape is single-owner; independent tapes may run
// on different threads against the same parameters as long as nobody writes
// parameter values or grads meanwhile.
template <typename T>
class Tape {
 public:
  // With record=false the tape keeps values only and backward() is unusable.
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Leaves.
  Var constant(Tensor<T> value);
  // A leaf whose gradient is kept (e.g. an externally produced embedding).
  Var variable(Tensor<T> value);
  // Binds a parameter without copying its value.
  Var parameter(Parameter<T>& p);

  const Tensor<T>& value(Var v) const;
  // Gradient after backward(); a zero tensor for nodes the loss ignores.
  Tensor<T> grad(Var v) const;

  // loss must be 1×1 (NotScalar) and recorded on this tape (DetachedGraph).
  void backward(Var loss);
  // Seeds d(out) with `seed` (same shape as out's value).
  void backward(Var out, const Tensor<T>& seed);
  // Adds each bound parameter's gradient into Parameter::grad.
  void accumulate_into_parameters() const;
  // backward(out, seed) that adds parameter gradients straight into
  // Parameter::grad, skipping the per-tape copy; grad() of a parameter leaf
  // then reads as zero. Callers must serialise these calls across tapes.
  void backward_into_parameters(Var out, const Tensor<T>& seed);

  // Linear algebra.
  Var matmul(Var a, Var b);     // a·b
  Var matmul_nt(Var a, Var b);  // a·bᵀ
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // adds a 1×n row to every row of a
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);        // elementwise
  Var scale(Var a, T factor);
  Var affine_scalar(Var a, T factor, T shift);  // factor·a + shift
  Var linear(Var x, Var weight, Var bias);      // x·W + b

  // Nonlinearities.
  Var relu(Var a);
  Var sigmoid(Var a);
  // log(clamp(a, floor, 1)); gradient is zero where the clamp is active.
  Var log_clamped(Var a, T floor);
  Var softmax_rows(Var a);
  Var layer_norm_rows(Var x, Var gamma, Var beta, T eps);
  // Inverted dropout; identity when p == 0 or rng == nullptr.
  Var dropout(Var a, T p, std::mt19937_64* rng);

  // Shape manipulation.
  Var slice_cols(Var a, std::size_t start, std::size_t count);
  Var slice_rows(Var a, std::size_t start, std::size_t count);
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);

  // Reductions.
  Var sum(Var a);
  // sum_ij coeff_ij · a_ij with constant coefficients.
  Var weighted_sum(Var a, const Tensor<T>& coeff);

 private:
  using Backprop = std::function<void(Tape&, std::uint32_t)>;

  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Parameter<T>* param = nullptr;
    Tensor<T> grad;
    std::vector<std::uint32_t> inputs;
    Backprop backprop;
    bool needs_grad = false;

    const Tensor<T>& val() const { return external ? *external : value; }
  };

  void check(Var v) const;
  bool needs(Var v) const { return nodes_[v.index_].needs_grad; }
  Var push(Tensor<T> value, std::vector<std::uint32_t> inputs, Backprop bp);
  Tensor<T>& grad_buffer(std::uint32_t index);
  const Tensor<T>& out_grad(std::uint32_t index) const {
    return nodes_[index].grad;
  }
  void run_backward(std::uint32_t root);

  bool record_;
  bool direct_ = false;
  std::vector<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace fsr::diff
