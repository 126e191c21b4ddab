#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "fsr/layers.hpp"

namespace fsr::diff {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<param>[index]" of the largest error
};

// Compares the gradients already stored in each Parameter::grad against
// central differences (f(θ+h) − f(θ−h)) / 2h of `loss`, which must be a
// deterministic forward-only evaluation. Up to `per_tensor` coordinates are
// sampled from every parameter. Relative error is |fd − g| / max(|fd|, |g|,
// floor); `floor` keeps vanishing gradients from amplifying rounding noise.
GradCheckResult finite_difference_check(const std::function<double()>& loss,
                                        const nn::ParamList<double>& params,
                                        double step, std::size_t per_tensor,
                                        std::uint64_t seed, double floor = 1e-6);

}  // namespace fsr::diff
