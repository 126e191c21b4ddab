#include <omp.h>

#include "fsr/kernels.hpp"
#include "kernels_detail.hpp"

namespace fsr::kernels {

namespace {

// Below this many multiply-adds the OpenMP fork costs more than it saves.
constexpr std::size_t kParallelWork = std::size_t{1} << 20;

bool want_parallel(std::size_t work) {
  return work >= kParallelWork && !omp_in_parallel() &&
         omp_get_max_threads() > 1;
}

}  // namespace

namespace parallel {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate) {
  const auto blocks = static_cast<std::ptrdiff_t>(detail::row_blocks(m));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    detail::nn_row_block(static_cast<std::size_t>(blk), m, n, k, a, b, c,
                         accumulate);
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate) {
  const auto bt = detail::transposed(b, n, k);
  gemm_nn(m, n, k, a, bt.data(), c, accumulate);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate) {
  const auto at = detail::transposed(a, k, m);
  gemm_nn(m, n, k, at.data(), b, c, accumulate);
}

template <typename T>
void sigmoid_scores(std::span<const T> rows, std::span<const T> w,
                    std::span<T> out) {
  const std::size_t d = w.size();
  const auto count = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    out[i] = detail::sigmoid_dot(rows.data() + i * d, w.data(), d);
  }
}

void nearest_distance_km(LatLonSpan query, LatLonSpan targets,
                         std::span<double> out) {
  const auto count = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    out[i] = detail::nearest_one(query.lat[i], query.lon[i], targets);
  }
}

#define FSR_INSTANTIATE(T)                                                  \
  template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, \
                           const T*, T*, bool);                             \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, \
                           const T*, T*, bool);                             \
  template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, \
                           const T*, T*, bool);                             \
  template void sigmoid_scores<T>(std::span<const T>, std::span<const T>,   \
                                  std::span<T>);
FSR_INSTANTIATE(float)
FSR_INSTANTIATE(double)
#undef FSR_INSTANTIATE

}  // namespace parallel

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate) {
  if (want_parallel(m * n * k)) {
    parallel::gemm_nn(m, n, k, a, b, c, accumulate);
  } else {
    serial::gemm_nn(m, n, k, a, b, c, accumulate);
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate) {
  if (want_parallel(m * n * k)) {
    parallel::gemm_nt(m, n, k, a, b, c, accumulate);
  } else {
    serial::gemm_nt(m, n, k, a, b, c, accumulate);
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate) {
  if (want_parallel(m * n * k)) {
    parallel::gemm_tn(m, n, k, a, b, c, accumulate);
  } else {
    serial::gemm_tn(m, n, k, a, b, c, accumulate);
  }
}

template <typename T>
void sigmoid_scores(std::span<const T> rows, std::span<const T> w,
                    std::span<T> out) {
  if (want_parallel(rows.size())) {
    parallel::sigmoid_scores(rows, w, out);
  } else {
    serial::sigmoid_scores(rows, w, out);
  }
}

void nearest_distance_km(LatLonSpan query, LatLonSpan targets,
                         std::span<double> out) {
  if (want_parallel(query.lat.size() * targets.lat.size() * 64)) {
    parallel::nearest_distance_km(query, targets, out);
  } else {
    serial::nearest_distance_km(query, targets, out);
  }
}

#define FSR_INSTANTIATE(T)                                                  \
  template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, \
                           const T*, T*, bool);                             \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, \
                           const T*, T*, bool);                             \
  template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, \
                           const T*, T*, bool);                             \
  template void sigmoid_scores<T>(std::span<const T>, std::span<const T>,   \
                                  std::span<T>);
FSR_INSTANTIATE(float)
FSR_INSTANTIATE(double)
#undef FSR_INSTANTIATE

}  // namespace fsr::kernels
