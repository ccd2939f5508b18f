#pragma once

#include <string>
#include <vector>

#include "tft/rng.hpp"

namespace tft {

/// One damped-ringing impact train: impacts repeat at fault_hz (with ~1%
/// interval jitter), each exciting an exponentially damped resonance.
struct ImpactTrain {
    double fault_hz = 0.0;      // characteristic repetition frequency, Hz
    double amplitude = 1.0;     // ring amplitude at impact onset
    double resonance_hz = 0.0;  // carrier ring frequency, Hz
    bool modulated = false;     // shaft-frequency amplitude modulation (inner-race style)
};

/// Full recipe for one synthetic vibration class.
struct SignalSpec {
    int class_id = 0;
    std::string class_name;
    double sample_rate = 12800.0;  // Hz
    int length = 1024;             // samples
    double shaft_hz = 17.5;        // shaft rotation frequency
    double tone_amplitude = 0.0;   // shaft-harmonic tone (normal class)
    std::vector<ImpactTrain> impacts;
    double damping = 600.0;           // ring decay, 1/s
    double modulation_depth = 0.6;    // in [0, 1]
    double noise_floor = 0.05;        // additive Gaussian RMS
    double jitter = 0.01;             // impact-interval jitter fraction
    double phase = 0.0;               // fraction of a period, shifts tone + first onsets
    void validate() const;
};

/// Physical parameters shared by the class roster.
struct FleetParams {
    double sample_rate = 12800.0;
    int length = 1024;
    double shaft_hz = 17.5;
    double bpfo_mult = 3.58;  // outer-race fault order
    double bpfi_mult = 5.42;  // inner-race fault order
    double resonance_inner_hz = 2400.0;
    double resonance_outer_hz = 3000.0;
    double damping = 600.0;
    double modulation_depth = 0.6;
    double noise_floor = 0.05;
    double weak_scale = 0.25;  // weak-fault impact amplitude factor
};

/// The seven-condition roster: normal, IRF, IRWF, ORF, ORWF, IORF, IORWF.
std::vector<SignalSpec> class_roster(const FleetParams& p);

/// Synthesizes one vibration window. Deterministic in (spec, rng seed).
std::vector<double> generate_signal(const SignalSpec& spec, Rng rng);

/// Adds zero-mean Gaussian noise with power P_signal / 10^(snr_db/10).
/// +infinity is the no-noise sentinel and returns the input unchanged.
std::vector<double> inject_noise(const std::vector<double>& signal, double snr_db, Rng rng);

}  // namespace tft
