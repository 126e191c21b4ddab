#include "fsr/tape.hpp"

#include <algorithm>
#include <cmath>

#include "fsr/kernels.hpp"

namespace fsr::diff {

namespace {

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                    "x" + std::to_string(b.cols()));
  }
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
void Tape<T>::check(Var v) const {
  if (v.owner_ != this || v.index_ >= nodes_.size()) {
    throw Error(ErrorCode::kDetachedGraph, "variable not recorded on this tape");
  }
}

template <typename T>
Var Tape<T>::push(Tensor<T> value, std::vector<std::uint32_t> inputs,
                  Backprop bp) {
  Node node;
  node.value = std::move(value);
  if (record_) {
    for (const auto i : inputs) node.needs_grad = node.needs_grad || nodes_[i].needs_grad;
    if (node.needs_grad) {
      node.inputs = std::move(inputs);
      node.backprop = std::move(bp);
    }
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(std::uint32_t index) {
  Node& n = nodes_[index];
  if (direct_ && n.param != nullptr) {
    if (!n.param->grad.same_shape(n.param->value)) n.param->zero_grad();
    return n.param->grad;
  }
  if (n.grad.size() == 0 && n.val().size() != 0) {
    n.grad = Tensor<T>(n.val().rows(), n.val().cols());
  }
  return n.grad;
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  return push(std::move(value), {}, nullptr);
}

template <typename T>
Var Tape<T>::variable(Tensor<T> value) {
  Var v = push(std::move(value), {}, nullptr);
  nodes_[v.index_].needs_grad = record_;
  return v;
}

template <typename T>
Var Tape<T>::parameter(Parameter<T>& p) {
  Node node;
  node.external = &p.value;
  node.param = &p;
  node.needs_grad = record_;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  check(v);
  return nodes_[v.index_].val();
}

template <typename T>
Tensor<T> Tape<T>::grad(Var v) const {
  check(v);
  const Node& n = nodes_[v.index_];
  if (n.grad.size() == 0) return Tensor<T>(n.val().rows(), n.val().cols());
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var loss) {
  check(loss);
  const auto& v = nodes_[loss.index_].val();
  if (v.rows() != 1 || v.cols() != 1) {
    throw Error(ErrorCode::kNotScalar, "loss must be 1x1");
  }
  backward(loss, Tensor<T>(1, 1, T(1)));
}

template <typename T>
void Tape<T>::backward(Var out, const Tensor<T>& seed) {
  check(out);
  if (!record_ || !nodes_[out.index_].needs_grad) {
    throw Error(ErrorCode::kDetachedGraph,
                "output does not depend on any differentiable leaf");
  }
  require_same(nodes_[out.index_].val(), seed, "backward seed");
  for (auto& n : nodes_) n.grad = Tensor<T>();
  nodes_[out.index_].grad = seed;
  run_backward(out.index_);
}

template <typename T>
void Tape<T>::backward_into_parameters(Var out, const Tensor<T>& seed) {
  direct_ = true;
  try {
    backward(out, seed);
  } catch (...) {
    direct_ = false;
    throw;
  }
  direct_ = false;
}

template <typename T>
void Tape<T>::run_backward(std::uint32_t root) {
  for (std::int64_t i = root; i >= 0; --i) {
    const auto idx = static_cast<std::uint32_t>(i);
    Node& n = nodes_[idx];
    if (!n.needs_grad || n.grad.size() == 0 || !n.backprop) continue;
    n.backprop(*this, idx);
  }
}

template <typename T>
void Tape<T>::accumulate_into_parameters() const {
  for (const auto& n : nodes_) {
    if (n.param == nullptr || n.grad.size() == 0) continue;
    if (n.param->grad.size() != n.grad.size()) n.param->zero_grad();
    add_into(n.param->grad, n.grad);
  }
}

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
  check(a);
  check(b);
  const auto& A = value(a);
  const auto& B = value(b);
  if (A.cols() != B.rows()) {
    throw Error(ErrorCode::kShapeMismatch,
                "matmul inner dims " + std::to_string(A.cols()) + " vs " +
                    std::to_string(B.rows()));
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor<T> c(m, n);
  kernels::gemm_nn(m, n, k, A.data(), B.data(), c.data(), false);
  const auto ia = a.index_, ib = b.index_;
  return push(std::move(c), {ia, ib}, [ia, ib, m, n, k](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    if (t.nodes_[ia].needs_grad) {
      auto& da = t.grad_buffer(ia);
      kernels::gemm_nt(m, k, n, dc.data(), t.nodes_[ib].val().data(), da.data(), true);
    }
    if (t.nodes_[ib].needs_grad) {
      auto& db = t.grad_buffer(ib);
      kernels::gemm_tn(k, n, m, t.nodes_[ia].val().data(), dc.data(), db.data(), true);
    }
  });
}

template <typename T>
Var Tape<T>::matmul_nt(Var a, Var b) {
  check(a);
  check(b);
  const auto& A = value(a);
  const auto& B = value(b);
  if (A.cols() != B.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "matmul_nt inner dims");
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Tensor<T> c(m, n);
  kernels::gemm_nt(m, n, k, A.data(), B.data(), c.data(), false);
  const auto ia = a.index_, ib = b.index_;
  return push(std::move(c), {ia, ib}, [ia, ib, m, n, k](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    if (t.nodes_[ia].needs_grad) {
      auto& da = t.grad_buffer(ia);
      kernels::gemm_nn(m, k, n, dc.data(), t.nodes_[ib].val().data(), da.data(), true);
    }
    if (t.nodes_[ib].needs_grad) {
      auto& db = t.grad_buffer(ib);
      kernels::gemm_tn(n, k, m, dc.data(), t.nodes_[ia].val().data(), db.data(), true);
    }
  });
}

template <typename T>
Var Tape<T>::linear(Var x, Var weight, Var bias) {
  check(bias);
  const auto& B = value(bias);
  const auto& W = value(weight);
  if (B.rows() != 1 || B.cols() != W.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "linear bias shape");
  }
  return add_row(matmul(x, weight), bias);
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  check(a);
  check(b);
  const auto& A = value(a);
  const auto& B = value(b);
  require_same(A, B, "add");
  Tensor<T> c = A;
  add_into(c, B);
  const auto ia = a.index_, ib = b.index_;
  return push(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    if (t.nodes_[ia].needs_grad) add_into(t.grad_buffer(ia), dc);
    if (t.nodes_[ib].needs_grad) add_into(t.grad_buffer(ib), dc);
  });
}

template <typename T>
Var Tape<T>::sub(Var a, Var b) {
  check(a);
  check(b);
  const auto& A = value(a);
  const auto& B = value(b);
  require_same(A, B, "sub");
  Tensor<T> c = A;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= B[i];
  const auto ia = a.index_, ib = b.index_;
  return push(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    if (t.nodes_[ia].needs_grad) add_into(t.grad_buffer(ia), dc);
    if (t.nodes_[ib].needs_grad) {
      auto& db = t.grad_buffer(ib);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] -= dc[i];
    }
  });
}

template <typename T>
Var Tape<T>::add_row(Var a, Var row) {
  check(a);
  check(row);
  const auto& A = value(a);
  const auto& R = value(row);
  if (R.rows() != 1 || R.cols() != A.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "add_row expects 1xcols row");
  }
  Tensor<T> c = A;
  for (std::size_t r = 0; r < c.rows(); ++r) {
    auto out = c.row(r);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += R[j];
  }
  const auto ia = a.index_, ir = row.index_;
  return push(std::move(c), {ia, ir}, [ia, ir](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    if (t.nodes_[ia].needs_grad) add_into(t.grad_buffer(ia), dc);
    if (t.nodes_[ir].needs_grad) {
      auto& dr = t.grad_buffer(ir);
      for (std::size_t r = 0; r < dc.rows(); ++r) {
        const auto g = dc.row(r);
        for (std::size_t j = 0; j < g.size(); ++j) dr[j] += g[j];
      }
    }
  });
}

template <typename T>
Var Tape<T>::mul(Var a, Var b) {
  check(a);
  check(b);
  const auto& A = value(a);
  const auto& B = value(b);
  require_same(A, B, "mul");
  Tensor<T> c = A;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= B[i];
  const auto ia = a.index_, ib = b.index_;
  return push(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    if (t.nodes_[ia].needs_grad) {
      auto& da = t.grad_buffer(ia);
      const auto& bv = t.nodes_[ib].val();
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += dc[i] * bv[i];
    }
    if (t.nodes_[ib].needs_grad) {
      auto& db = t.grad_buffer(ib);
      const auto& av = t.nodes_[ia].val();
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += dc[i] * av[i];
    }
  });
}

template <typename T>
Var Tape<T>::scale(Var a, T factor) {
  return affine_scalar(a, factor, T(0));
}

template <typename T>
Var Tape<T>::affine_scalar(Var a, T factor, T shift) {
  check(a);
  Tensor<T> c = value(a);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = factor * c[i] + shift;
  const auto ia = a.index_;
  return push(std::move(c), {ia}, [ia, factor](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    auto& da = t.grad_buffer(ia);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += factor * dc[i];
  });
}

template <typename T>
Var Tape<T>::relu(Var a) {
  check(a);
  Tensor<T> c = value(a);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = c[i] > T(0) ? c[i] : T(0);
  const auto ia = a.index_;
  return push(std::move(c), {ia}, [ia](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    const auto& y = t.nodes_[self].val();
    auto& da = t.grad_buffer(ia);
    for (std::size_t i = 0; i < da.size(); ++i) {
      if (y[i] > T(0)) da[i] += dc[i];
    }
  });
}

template <typename T>
Var Tape<T>::sigmoid(Var a) {
  check(a);
  Tensor<T> c = value(a);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = stable_sigmoid(c[i]);
  const auto ia = a.index_;
  return push(std::move(c), {ia}, [ia](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    const auto& y = t.nodes_[self].val();
    auto& da = t.grad_buffer(ia);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += dc[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var Tape<T>::log_clamped(Var a, T floor) {
  check(a);
  const auto& A = value(a);
  Tensor<T> c(A.rows(), A.cols());
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = std::log(std::clamp(A[i], floor, T(1)));
  }
  const auto ia = a.index_;
  return push(std::move(c), {ia}, [ia, floor](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    const auto& x = t.nodes_[ia].val();
    auto& da = t.grad_buffer(ia);
    for (std::size_t i = 0; i < da.size(); ++i) {
      if (x[i] > floor && x[i] <= T(1)) da[i] += dc[i] / x[i];
    }
  });
}

template <typename T>
Var Tape<T>::softmax_rows(Var a) {
  check(a);
  Tensor<T> c = value(a);
  for (std::size_t r = 0; r < c.rows(); ++r) {
    auto row = c.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T total = 0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      total += v;
    }
    for (auto& v : row) v /= total;
  }
  const auto ia = a.index_;
  return push(std::move(c), {ia}, [ia](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    const auto& y = t.nodes_[self].val();
    auto& da = t.grad_buffer(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const auto yr = y.row(r);
      const auto gr = dc.row(r);
      T dot = 0;
      for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * gr[j];
      auto dr = da.row(r);
      for (std::size_t j = 0; j < yr.size(); ++j) dr[j] += yr[j] * (gr[j] - dot);
    }
  });
}

template <typename T>
Var Tape<T>::layer_norm_rows(Var x, Var gamma, Var beta, T eps) {
  check(x);
  check(gamma);
  check(beta);
  const auto& X = value(x);
  const auto& G = value(gamma);
  const auto& B = value(beta);
  const std::size_t n = X.cols();
  if (G.rows() != 1 || G.cols() != n || !G.same_shape(B)) {
    throw Error(ErrorCode::kShapeMismatch, "layer_norm gamma/beta shape");
  }
  Tensor<T> xhat(X.rows(), n);
  std::vector<T> rstd(X.rows());
  Tensor<T> y(X.rows(), n);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto xr = X.row(r);
    T mean = 0;
    for (const T v : xr) mean += v;
    mean /= static_cast<T>(n);
    T var = 0;
    for (const T v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<T>(n);
    rstd[r] = T(1) / std::sqrt(var + eps);
    auto hr = xhat.row(r);
    auto yr = y.row(r);
    for (std::size_t j = 0; j < n; ++j) {
      hr[j] = (xr[j] - mean) * rstd[r];
      yr[j] = hr[j] * G[j] + B[j];
    }
  }
  const auto ix = x.index_, ig = gamma.index_, ib = beta.index_;
  return push(std::move(y), {ix, ig, ib},
              [ix, ig, ib, n, xhat = std::move(xhat), rstd = std::move(rstd)](
                  Tape& t, std::uint32_t self) {
                const auto& dy = t.out_grad(self);
                const auto& g = t.nodes_[ig].val();
                if (t.nodes_[ig].needs_grad) {
                  auto& dg = t.grad_buffer(ig);
                  for (std::size_t r = 0; r < dy.rows(); ++r) {
                    for (std::size_t j = 0; j < n; ++j) dg[j] += dy(r, j) * xhat(r, j);
                  }
                }
                if (t.nodes_[ib].needs_grad) {
                  auto& db = t.grad_buffer(ib);
                  for (std::size_t r = 0; r < dy.rows(); ++r) {
                    for (std::size_t j = 0; j < n; ++j) db[j] += dy(r, j);
                  }
                }
                if (t.nodes_[ix].needs_grad) {
                  auto& dx = t.grad_buffer(ix);
                  std::vector<T> dh(n);
                  for (std::size_t r = 0; r < dy.rows(); ++r) {
                    T sum_dh = 0;
                    T sum_dh_h = 0;
                    for (std::size_t j = 0; j < n; ++j) {
                      dh[j] = dy(r, j) * g[j];
                      sum_dh += dh[j];
                      sum_dh_h += dh[j] * xhat(r, j);
                    }
                    const T inv_n = T(1) / static_cast<T>(n);
                    for (std::size_t j = 0; j < n; ++j) {
                      dx(r, j) += rstd[r] * (dh[j] - inv_n * sum_dh -
                                             xhat(r, j) * inv_n * sum_dh_h);
                    }
                  }
                }
              });
}

template <typename T>
Var Tape<T>::dropout(Var a, T p, std::mt19937_64* rng) {
  check(a);
  if (rng == nullptr || p <= T(0)) return a;
  const auto& A = value(a);
  Tensor<T> mask(A.rows(), A.cols());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const T keep_scale = p >= T(1) ? T(0) : T(1) / (T(1) - p);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = unit(*rng) >= static_cast<double>(p) ? keep_scale : T(0);
  }
  Tensor<T> c = A;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= mask[i];
  const auto ia = a.index_;
  return push(std::move(c), {ia}, [ia, mask = std::move(mask)](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    auto& da = t.grad_buffer(ia);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += dc[i] * mask[i];
  });
}

template <typename T>
Var Tape<T>::slice_cols(Var a, std::size_t start, std::size_t count) {
  check(a);
  const auto& A = value(a);
  if (start + count > A.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "slice_cols out of range");
  }
  Tensor<T> c(A.rows(), count);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    std::copy_n(A.data() + r * A.cols() + start, count, c.data() + r * count);
  }
  const auto ia = a.index_;
  return push(std::move(c), {ia}, [ia, start, count](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    auto& da = t.grad_buffer(ia);
    for (std::size_t r = 0; r < dc.rows(); ++r) {
      for (std::size_t j = 0; j < count; ++j) da(r, start + j) += dc(r, j);
    }
  });
}

template <typename T>
Var Tape<T>::slice_rows(Var a, std::size_t start, std::size_t count) {
  check(a);
  const auto& A = value(a);
  if (start + count > A.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "slice_rows out of range");
  }
  Tensor<T> c(count, A.cols(),
              std::vector<T>(A.data() + start * A.cols(),
                             A.data() + (start + count) * A.cols()));
  const auto ia = a.index_;
  return push(std::move(c), {ia}, [ia, start](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    auto& da = t.grad_buffer(ia);
    T* dst = da.data() + start * da.cols();
    for (std::size_t i = 0; i < dc.size(); ++i) dst[i] += dc[i];
  });
}

template <typename T>
Var Tape<T>::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat of nothing");
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    check(p);
    const auto& v = value(p);
    if (ids.empty()) rows = v.rows();
    if (v.rows() != rows) throw Error(ErrorCode::kShapeMismatch, "concat_cols rows");
    ids.push_back(p.index_);
    widths.push_back(v.cols());
    cols += v.cols();
  }
  Tensor<T> c(rows, cols);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = value(parts[k]);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * v.cols(), v.cols(), c.data() + r * cols + offset);
    }
    offset += widths[k];
  }
  return push(std::move(c), ids, [ids, widths](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.nodes_[ids[k]].needs_grad) {
        auto& d = t.grad_buffer(ids[k]);
        for (std::size_t r = 0; r < dc.rows(); ++r) {
          for (std::size_t j = 0; j < widths[k]; ++j) d(r, j) += dc(r, off + j);
        }
      }
      off += widths[k];
    }
  });
}

template <typename T>
Var Tape<T>::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat of nothing");
  std::size_t cols = 0;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> heights;
  std::vector<T> data;
  for (const Var& p : parts) {
    check(p);
    const auto& v = value(p);
    if (ids.empty()) cols = v.cols();
    if (v.cols() != cols) throw Error(ErrorCode::kShapeMismatch, "concat_rows cols");
    ids.push_back(p.index_);
    heights.push_back(v.rows());
    data.insert(data.end(), v.storage().begin(), v.storage().end());
  }
  const std::size_t rows = data.size() / std::max<std::size_t>(cols, 1);
  Tensor<T> c(rows, cols, std::move(data));
  return push(std::move(c), ids, [ids, heights, cols](Tape& t, std::uint32_t self) {
    const auto& dc = t.out_grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.nodes_[ids[k]].needs_grad) {
        auto& d = t.grad_buffer(ids[k]);
        const T* src = dc.data() + off * cols;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += src[i];
      }
      off += heights[k];
    }
  });
}

template <typename T>
Var Tape<T>::sum(Var a) {
  check(a);
  const auto& A = value(a);
  T total = 0;
  for (std::size_t i = 0; i < A.size(); ++i) total += A[i];
  const auto ia = a.index_;
  return push(Tensor<T>(1, 1, total), {ia}, [ia](Tape& t, std::uint32_t self) {
    const T g = t.out_grad(self)[0];
    auto& da = t.grad_buffer(ia);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += g;
  });
}

template <typename T>
Var Tape<T>::weighted_sum(Var a, const Tensor<T>& coeff) {
  check(a);
  const auto& A = value(a);
  require_same(A, coeff, "weighted_sum");
  T total = 0;
  for (std::size_t i = 0; i < A.size(); ++i) total += coeff[i] * A[i];
  const auto ia = a.index_;
  return push(Tensor<T>(1, 1, total), {ia}, [ia, coeff](Tape& t, std::uint32_t self) {
    const T g = t.out_grad(self)[0];
    auto& da = t.grad_buffer(ia);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += g * coeff[i];
  });
}

template class Tape<float>;
template class Tape<double>;

}  // namespace fsr::diff
