#include "fsr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fsr::diff {

GradCheckResult finite_difference_check(const std::function<double()>& loss,
                                        const nn::ParamList<double>& params,
                                        double step, std::size_t per_tensor,
                                        std::uint64_t seed, double floor) {
  GradCheckResult result;
  std::mt19937_64 rng(seed);
  for (auto* p : params) {
    const std::size_t n = p->value.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (n > per_tensor) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(per_tensor);
    }
    for (const std::size_t i : idx) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      const double up = loss();
      p->value[i] = saved - step;
      const double down = loss();
      p->value[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = p->grad.size() == n ? p->grad[i] : 0.0;
      const double denom = std::max({std::abs(fd), std::abs(an), floor});
      const double rel = std::abs(fd - an) / denom;
      ++result.checked;
      if (rel > result.max_rel_error || result.worst.empty()) {
        if (rel >= result.max_rel_error) {
          result.max_rel_error = rel;
          result.worst = p->name + "[" + std::to_string(i) + "]";
        }
      }
    }
  }
  return result;
}

}  // namespace fsr::diff
