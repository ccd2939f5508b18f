#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tft/rng.hpp"
#include "tft/tensor.hpp"

namespace testutil {

inline tft::Tensor random_tensor(const std::vector<int>& shape, tft::Rng& rng, double lo = -2.0,
                                 double hi = 2.0) {
    return tft::uniform_tensor(shape, lo, hi, rng);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Scratch directory unique to the current test binary; wiped on creation.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("tft_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Rectified moving-average envelope followed by peak picking; the
/// impact-count oracle for synthesized fault signals.
inline int count_envelope_peaks(const std::vector<double>& x, double sample_rate,
                                double min_spacing_hz, double threshold_frac = 0.35) {
    const int n = static_cast<int>(x.size());
    const int win = std::max(1, static_cast<int>(sample_rate / (min_spacing_hz * 8.0)));
    std::vector<double> env(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        int cnt = 0;
        for (int j = std::max(0, i - win); j <= std::min(n - 1, i + win); ++j) {
            s += std::abs(x[j]);
            ++cnt;
        }
        env[i] = s / cnt;
    }
    double peak = 0.0;
    for (double v : env) peak = std::max(peak, v);
    const double thresh = threshold_frac * peak;
    const int spacing = static_cast<int>(0.5 * sample_rate / min_spacing_hz);
    int count = 0;
    int last = -spacing - 1;
    for (int i = 1; i + 1 < n; ++i) {
        if (env[i] > thresh && env[i] >= env[i - 1] && env[i] >= env[i + 1] &&
            i - last > spacing) {
            ++count;
            last = i;
        }
    }
    return count;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cab = 0.0, caa = 0.0, cbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cab += (a[i] - ma) * (b[i] - mb);
        caa += (a[i] - ma) * (a[i] - ma);
        cbb += (b[i] - mb) * (b[i] - mb);
    }
    if (caa == 0.0 || cbb == 0.0) return 0.0;
    return cab / std::sqrt(caa * cbb);
}

}  // namespace testutil
