#pragma once

// Dense numeric kernels. Every kernel has a serial reference in
// `kernels::serial` and an OpenMP version in `kernels::parallel` that
// partitions the same per-element work, so both produce bit-identical
// results. The unqualified entry points pick one based on problem size and
// whether the caller is already inside a parallel region.

#include <cstddef>
#include <span>

namespace fsr::kernels {

// All matrices are dense row-major.
//   gemm_nn: C[m×n] (+)= A[m×k] · B[k×n]
//   gemm_nt: C[m×n] (+)= A[m×k] · B[n×k]ᵀ
//   gemm_tn: C[m×n] (+)= A[k×m]ᵀ · B[k×n]
// `accumulate` adds into C instead of overwriting it.

// Latitude/longitude pairs in degrees, as parallel spans.
struct LatLonSpan {
  std::span<const double> lat;
  std::span<const double> lon;
};

namespace serial {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate);
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate);
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate);

// out[i] = sigmoid(dot(rows[i, :], w)) for a rows.size()/w.size() × w.size()
// matrix.
template <typename T>
void sigmoid_scores(std::span<const T> rows, std::span<const T> w,
                    std::span<T> out);

// out[i] = min_j haversine(query_i, target_j) in km. Targets must be
// nonempty.
void nearest_distance_km(LatLonSpan query, LatLonSpan targets,
                         std::span<double> out);

}  // namespace serial

namespace parallel {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate);
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate);
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate);
template <typename T>
void sigmoid_scores(std::span<const T> rows, std::span<const T> w,
                    std::span<T> out);
void nearest_distance_km(LatLonSpan query, LatLonSpan targets,
                         std::span<double> out);

}  // namespace parallel

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate);
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate);
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate);
template <typename T>
void sigmoid_scores(std::span<const T> rows, std::span<const T> w,
                    std::span<T> out);
void nearest_distance_km(LatLonSpan query, LatLonSpan targets,
                         std::span<double> out);

}  // namespace fsr::kernels
