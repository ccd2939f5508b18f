#pragma once

#include "tft/tensor.hpp"

namespace tft {

/// Keys cubic-convolution kernel, a = -0.5.
double keys_kernel(double s);

/// Separable bicubic resampling with edge-clamped taps. Centers are aligned
/// (src = (dst + 0.5) * in/out - 0.5). Constants are reproduced exactly and a
/// same-size resize is a bitwise copy.
Tensor bicubic_resize(const Tensor& image, int out_h, int out_w);

}  // namespace tft
