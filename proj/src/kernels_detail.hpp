#pragma once

// Shared per-block routines. The serial and OpenMP kernels call exactly these
// functions on the same blocks, which is what makes them bit-identical.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <limits>
#include <vector>

#include "fsr/kernels.hpp"

namespace fsr::kernels::detail {

inline constexpr std::size_t kRowBlock = 4;

// 64-byte SIMD lanes through GCC/Clang vector extensions.
typedef float VecF __attribute__((vector_size(64)));
typedef double VecD __attribute__((vector_size(64)));

template <typename T>
struct Simd;
template <>
struct Simd<float> {
  using type = VecF;
  static constexpr std::size_t lanes = 16;
};
template <>
struct Simd<double> {
  using type = VecD;
  static constexpr std::size_t lanes = 8;
};

inline constexpr std::size_t kColVecs = 4;

// C[i..i+Rows, j0..j0+Vecs*lanes] for one register block.
template <typename T, std::size_t Rows, std::size_t Vecs>
inline void micro_block(std::size_t i, std::size_t j0, std::size_t n,
                        std::size_t k, const T* a, const T* b, T* c,
                        bool accumulate) {
  using V = typename Simd<T>::type;
  constexpr std::size_t L = Simd<T>::lanes;
  V acc[Rows][Vecs];
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t v = 0; v < Vecs; ++v) {
      if (accumulate) {
        std::memcpy(&acc[r][v], c + (i + r) * n + j0 + v * L, sizeof(V));
      } else {
        acc[r][v] = V{};
      }
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    V bv[Vecs];
    for (std::size_t v = 0; v < Vecs; ++v) {
      std::memcpy(&bv[v], b + p * n + j0 + v * L, sizeof(V));
    }
    for (std::size_t r = 0; r < Rows; ++r) {
      const T av = a[(i + r) * k + p];
      for (std::size_t v = 0; v < Vecs; ++v) acc[r][v] += av * bv[v];
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t v = 0; v < Vecs; ++v) {
      std::memcpy(c + (i + r) * n + j0 + v * L, &acc[r][v], sizeof(V));
    }
  }
}

// Columns narrower than one SIMD vector.
template <typename T>
inline void scalar_cols(std::size_t i, std::size_t rows, std::size_t j0,
                        std::size_t width, std::size_t n, std::size_t k,
                        const T* a, const T* b, T* c, bool accumulate) {
  for (std::size_t r = i; r < i + rows; ++r) {
    for (std::size_t j = j0; j < j0 + width; ++j) {
      T acc = accumulate ? c[r * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) acc += a[r * k + p] * b[p * n + j];
      c[r * n + j] = acc;
    }
  }
}

template <typename T, std::size_t Rows>
inline void row_strip(std::size_t i, std::size_t n, std::size_t k, const T* a,
                      const T* b, T* c, bool accumulate) {
  constexpr std::size_t L = Simd<T>::lanes;
  std::size_t j = 0;
  for (; j + kColVecs * L <= n; j += kColVecs * L) {
    micro_block<T, Rows, kColVecs>(i, j, n, k, a, b, c, accumulate);
  }
  for (; j + L <= n; j += L) micro_block<T, Rows, 1>(i, j, n, k, a, b, c, accumulate);
  if (j < n) scalar_cols(i, Rows, j, n - j, n, k, a, b, c, accumulate);
}

// Rows [block*kRowBlock, ...) of C; the last block may be short.
template <typename T>
inline void nn_row_block(std::size_t block, std::size_t m, std::size_t n,
                         std::size_t k, const T* a, const T* b, T* c,
                         bool accumulate) {
  const std::size_t i0 = block * kRowBlock;
  switch (std::min(kRowBlock, m - i0)) {
    case 4: row_strip<T, 4>(i0, n, k, a, b, c, accumulate); break;
    case 3: row_strip<T, 3>(i0, n, k, a, b, c, accumulate); break;
    case 2: row_strip<T, 2>(i0, n, k, a, b, c, accumulate); break;
    case 1: row_strip<T, 1>(i0, n, k, a, b, c, accumulate); break;
    default: break;
  }
}

inline std::size_t row_blocks(std::size_t m) {
  return (m + kRowBlock - 1) / kRowBlock;
}

template <typename T>
std::vector<T> transposed(const T* src, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  }
  return out;
}

template <typename T>
inline T sigmoid_dot(const T* row, const T* w, std::size_t d) {
  T s = 0;
  for (std::size_t j = 0; j < d; ++j) s += row[j] * w[j];
  return T(1) / (T(1) + std::exp(-s));
}

double haversine_deg(double lat1, double lon1, double lat2, double lon2);

inline double nearest_one(double lat, double lon, LatLonSpan targets) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < targets.lat.size(); ++j) {
    best = std::min(best, haversine_deg(lat, lon, targets.lat[j], targets.lon[j]));
  }
  return best;
}

}  // namespace fsr::kernels::detail
