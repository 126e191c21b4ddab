#include "fsr/geo.hpp"
#include "fsr/kernels.hpp"
#include "kernels_detail.hpp"

namespace fsr::kernels {

namespace detail {

double haversine_deg(double lat1, double lon1, double lat2, double lon2) {
  return geo::haversine_km_deg(lat1, lon1, lat2, lon2);
}

}  // namespace detail

namespace serial {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c, bool accumulate) {
  const std::size_t blocks = detail::row_blocks(m);
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    detail::nn_row_block(blk, m, n, k, a, b, c, accumulate);
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
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = detail::sigmoid_dot(rows.data() + i * d, w.data(), d);
  }
}

void nearest_distance_km(LatLonSpan query, LatLonSpan targets,
                         std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
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

}  // namespace serial
}  // namespace fsr::kernels
