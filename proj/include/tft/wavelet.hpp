#pragma once

#include <complex>
#include <vector>

#include "tft/tensor.hpp"

namespace tft {

/// Analytic-Morlet continuous wavelet plan plus the synchrosqueezing grid.
/// The scale grid is geometric (voices per octave between fmin and fmax);
/// squeeze bins are linearly spaced over the same band.
struct WaveletPlan {
    double sample_rate = 1024.0;
    double omega0 = 6.0;      // Morlet center frequency (rad)
    int voices = 16;          // scales per octave
    double fmin = 4.0;        // Hz; default choice is 4*fs/n
    double fmax = 512.0;      // Hz; default choice is fs/2
    int ssq_bins = 64;        // N_f squeeze bins
    double gamma_rel = 1e-8;  // magnitude threshold, relative to max |W|

    void validate() const;
    /// Scales in seconds, strictly increasing (high frequency first).
    std::vector<double> scales() const;
    /// Center frequency of each scale, Hz (descending, parallel to scales()).
    std::vector<double> scale_freqs() const;
    /// Squeeze-bin center frequencies, strictly increasing.
    std::vector<double> bin_freqs() const;
    int nearest_bin(double freq_hz) const;
};

struct CwtResult {
    int n_scales = 0;
    int n = 0;  // time samples
    std::vector<std::complex<double>> w;  // n_scales x n, row-major
    std::vector<double> scales;
    std::vector<double> freqs;

    std::complex<double> at(int s, int t) const { return w[static_cast<std::size_t>(s) * n + t]; }
};

/// Continuous wavelet transform via frequency-domain multiplication. The
/// signal is mean-removed and zero-padded to a power of two (at least 2n) to
/// suppress circular wraparound.
CwtResult cwt(const std::vector<double>& signal, const WaveletPlan& plan);

/// Synchrosqueezing: reassigns each |W(a,b)| above threshold to the squeeze
/// bin nearest its instantaneous frequency (central phase difference in time).
/// Output rows are time, columns are squeeze bins; all entries nonnegative.
Tensor synchrosqueeze(const CwtResult& coeffs, const WaveletPlan& plan);

/// In-place complex FFT helper, power-of-two length (inverse when back=true).
void fft_pow2(std::vector<std::complex<double>>& a, bool inverse);

}  // namespace tft
