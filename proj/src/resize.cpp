#include "tft/resize.hpp"

#include <algorithm>
#include <cmath>

#include "tft/errors.hpp"

namespace tft {

double keys_kernel(double s) {
    s = std::abs(s);
    if (s <= 1.0) return (1.5 * s - 2.5) * s * s + 1.0;
    if (s < 2.0) return ((-0.5 * s + 2.5) * s - 4.0) * s + 2.0;
    return 0.0;
}

namespace {

// One separable pass. The convolution is evaluated in difference form around
// the nearest-left tap: out = x0 + sum_i w_i (x_i - x0). Since the kernel is a
// partition of unity this is the same sum, but constants pass through exactly
// and integer-aligned sources reproduce samples bitwise.
void resize_axis(const std::vector<double>& in, int in_len, int lines, int stride_in,
                 int line_stride_in, std::vector<double>& out, int out_len, int stride_out,
                 int line_stride_out) {
    const double scale = static_cast<double>(in_len) / out_len;
    for (int o = 0; o < out_len; ++o) {
        const double src = (o + 0.5) * scale - 0.5;
        const double fl = std::floor(src);
        const int i0 = static_cast<int>(fl);
        const double u = src - fl;
        const double w_m1 = keys_kernel(1.0 + u);
        const double w_p1 = keys_kernel(1.0 - u);
        const double w_p2 = keys_kernel(2.0 - u);
        const int im1 = std::clamp(i0 - 1, 0, in_len - 1);
        const int ic = std::clamp(i0, 0, in_len - 1);
        const int ip1 = std::clamp(i0 + 1, 0, in_len - 1);
        const int ip2 = std::clamp(i0 + 2, 0, in_len - 1);
        for (int line = 0; line < lines; ++line) {
            const std::size_t base_in = static_cast<std::size_t>(line) * line_stride_in;
            const double x0 = in[base_in + static_cast<std::size_t>(ic) * stride_in];
            const double acc =
                w_m1 * (in[base_in + static_cast<std::size_t>(im1) * stride_in] - x0) +
                w_p1 * (in[base_in + static_cast<std::size_t>(ip1) * stride_in] - x0) +
                w_p2 * (in[base_in + static_cast<std::size_t>(ip2) * stride_in] - x0);
            out[static_cast<std::size_t>(line) * line_stride_out +
                static_cast<std::size_t>(o) * stride_out] = x0 + acc;
        }
    }
}

}  // namespace

Tensor bicubic_resize(const Tensor& image, int out_h, int out_w) {
    if (image.rank() != 2) throw ConfigError("bicubic_resize: rank-2 image required");
    const int h = image.shape()[0];
    const int w = image.shape()[1];
    if (h < 4 || w < 4) throw ConfigError("bicubic_resize: input must be at least 4x4");
    if (out_h < 1 || out_w < 1) throw ConfigError("bicubic_resize: target extents must be >= 1");

    // horizontal pass, then vertical
    std::vector<double> mid(static_cast<std::size_t>(h) * out_w);
    resize_axis(image.data(), w, h, 1, w, mid, out_w, 1, out_w);
    std::vector<double> final(static_cast<std::size_t>(out_h) * out_w);
    resize_axis(mid, h, out_w, out_w, 1, final, out_h, out_w, 1);
    return Tensor::from_data({out_h, out_w}, std::move(final));
}

}  // namespace tft
