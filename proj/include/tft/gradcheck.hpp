#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tft/tensor.hpp"

namespace tft {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Central finite-difference audit of reverse-mode gradients.
///
/// `f` must rebuild the scalar loss from the current parameter values on every
/// call (and be deterministic: dropout masks, if any, must be fixed). Relative
/// error is |analytic - central| / max(|analytic|, |central|, 1e-8), maximized
/// over every entry of every parameter. A non-finite loss during perturbation
/// throws NumericFault naming the offending parameter entry.
GradCheckReport gradient_check(const std::function<Tensor()>& f,
                               const std::vector<std::pair<std::string, Tensor>>& params,
                               double perturbation = 1e-5);

}  // namespace tft
