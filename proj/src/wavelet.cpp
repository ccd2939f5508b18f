#include "tft/wavelet.hpp"

#include <algorithm>
#include <cmath>

#include "tft/errors.hpp"

namespace tft {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPiQuarterInv = 0.7511255444649424828587030047762;  // pi^(-1/4)
}  // namespace

void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw ConfigError("fft: length must be a power of two");
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& v : a) v *= inv;
    }
}

void WaveletPlan::validate() const {
    if (sample_rate <= 0.0) throw ConfigError("wavelet plan: bad sample rate");
    if (omega0 <= 0.0) throw ConfigError("wavelet plan: omega0 must be positive");
    if (voices < 1) throw ConfigError("wavelet plan: voices must be >= 1");
    if (fmin <= 0.0 || fmax <= fmin) throw ConfigError("wavelet plan: bad frequency range");
    if (fmax > sample_rate / 2.0) throw ConfigError("wavelet plan: fmax above Nyquist");
    if (ssq_bins < 2) throw ConfigError("wavelet plan: need at least 2 squeeze bins");
    if (gamma_rel <= 0.0) throw ConfigError("wavelet plan: threshold must be positive");
}

std::vector<double> WaveletPlan::scale_freqs() const {
    validate();
    const int n_scales =
        static_cast<int>(std::floor(voices * std::log2(fmax / fmin))) + 1;
    std::vector<double> freqs(n_scales);
    // descending frequency so the parallel scale grid is ascending
    for (int j = 0; j < n_scales; ++j)
        freqs[j] = fmax * std::pow(2.0, -static_cast<double>(j) / voices);
    return freqs;
}

std::vector<double> WaveletPlan::scales() const {
    std::vector<double> s = scale_freqs();
    for (double& f : s) f = omega0 / (kTwoPi * f);
    return s;
}

std::vector<double> WaveletPlan::bin_freqs() const {
    validate();
    std::vector<double> bins(ssq_bins);
    const double step = (fmax - fmin) / (ssq_bins - 1);
    for (int j = 0; j < ssq_bins; ++j) bins[j] = fmin + step * j;
    return bins;
}

int WaveletPlan::nearest_bin(double freq_hz) const {
    const double step = (fmax - fmin) / (ssq_bins - 1);
    const int j = static_cast<int>(std::lround((freq_hz - fmin) / step));
    return std::clamp(j, 0, ssq_bins - 1);
}

CwtResult cwt(const std::vector<double>& signal, const WaveletPlan& plan) {
    plan.validate();
    const int n = static_cast<int>(signal.size());
    if (n < 64) throw ConfigError("cwt: signal too short");

    // mean removal, then zero-pad to a power of two with a guard band
    double mu = 0.0;
    for (double v : signal) mu += v;
    mu /= n;
    std::size_t m = 1;
    while (m < static_cast<std::size_t>(2 * n)) m <<= 1;
    std::vector<std::complex<double>> spectrum(m, {0.0, 0.0});
    for (int k = 0; k < n; ++k) spectrum[k] = signal[k] - mu;
    fft_pow2(spectrum, false);

    CwtResult result;
    result.n = n;
    result.scales = plan.scales();
    result.freqs = plan.scale_freqs();
    result.n_scales = static_cast<int>(result.scales.size());
    result.w.resize(static_cast<std::size_t>(result.n_scales) * n);

    // analytic Morlet: psi_hat(xi) = pi^(-1/4) exp(-(xi - omega0)^2 / 2), xi > 0
    std::vector<std::complex<double>> work(m);
    const double dw = kTwoPi * plan.sample_rate / static_cast<double>(m);
    for (int s = 0; s < result.n_scales; ++s) {
        const double a = result.scales[s];
        const double root_a = std::sqrt(a);
        work.assign(m, {0.0, 0.0});
        for (std::size_t k = 1; k < m / 2; ++k) {  // positive frequencies only
            const double xi = a * dw * static_cast<double>(k);
            const double arg = xi - plan.omega0;
            const double psi = kPiQuarterInv * std::exp(-0.5 * arg * arg);
            work[k] = spectrum[k] * (root_a * psi);
        }
        fft_pow2(work, true);
        for (int t = 0; t < n; ++t) result.w[static_cast<std::size_t>(s) * n + t] = work[t];
    }
    return result;
}

Tensor synchrosqueeze(const CwtResult& coeffs, const WaveletPlan& plan) {
    plan.validate();
    const int n = coeffs.n;
    const int n_scales = coeffs.n_scales;
    const int bins = plan.ssq_bins;

    double max_mag = 0.0;
    for (const auto& c : coeffs.w) max_mag = std::max(max_mag, std::abs(c));
    const double gamma = plan.gamma_rel * max_mag;

    Tensor out = Tensor::zeros({n, bins});
    auto& ov = out.data_mut();
    if (max_mag == 0.0) return out;

    for (int s = 0; s < n_scales; ++s) {
        const std::size_t row = static_cast<std::size_t>(s) * n;
        for (int t = 0; t < n; ++t) {
            const std::complex<double> w = coeffs.w[row + t];
            const double mag = std::abs(w);
            if (mag <= gamma) continue;
            // instantaneous frequency from the phase difference; central in the
            // interior, one-sided at the edges
            const int tm = t > 0 ? t - 1 : t;
            const int tp = t < n - 1 ? t + 1 : t;
            const std::complex<double> ratio =
                coeffs.w[row + tp] * std::conj(coeffs.w[row + tm]);
            if (std::abs(ratio) == 0.0) continue;
            const double dphi = std::arg(ratio);
            const double omega_hz = dphi * plan.sample_rate / (kTwoPi * (tp - tm));
            const int bin = plan.nearest_bin(omega_hz);
            ov[static_cast<std::size_t>(t) * bins + bin] += mag;
        }
    }
    return out;
}

}  // namespace tft
