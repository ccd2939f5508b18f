#include "tft/signal.hpp"

#include <cmath>

#include "tft/errors.hpp"

namespace tft {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void SignalSpec::validate() const {
    if (sample_rate <= 0.0 || length <= 0) throw ConfigError("signal spec: bad sampling");
    const double nyquist = sample_rate / 2.0;
    if (shaft_hz <= 0.0 || shaft_hz >= nyquist)
        throw ConfigError("signal spec: shaft frequency violates Nyquist");
    for (const ImpactTrain& t : impacts) {
        if (t.fault_hz <= 0.0 || t.fault_hz >= nyquist)
            throw ConfigError("signal spec: fault frequency violates Nyquist");
        if (t.resonance_hz <= 0.0 || t.resonance_hz >= nyquist)
            throw ConfigError("signal spec: resonance frequency violates Nyquist");
    }
    if (damping <= 0.0) throw ConfigError("signal spec: damping must be positive");
    if (modulation_depth < 0.0 || modulation_depth > 1.0)
        throw ConfigError("signal spec: modulation depth must be in [0, 1]");
    if (noise_floor < 0.0) throw ConfigError("signal spec: negative noise floor");
}

std::vector<SignalSpec> class_roster(const FleetParams& p) {
    auto base = [&](int id, const char* name) {
        SignalSpec s;
        s.class_id = id;
        s.class_name = name;
        s.sample_rate = p.sample_rate;
        s.length = p.length;
        s.shaft_hz = p.shaft_hz;
        s.damping = p.damping;
        s.modulation_depth = p.modulation_depth;
        s.noise_floor = p.noise_floor;
        return s;
    };
    auto inner = [&](double amp) {
        return ImpactTrain{p.bpfi_mult * p.shaft_hz, amp, p.resonance_inner_hz, true};
    };
    auto outer = [&](double amp) {
        return ImpactTrain{p.bpfo_mult * p.shaft_hz, amp, p.resonance_outer_hz, false};
    };

    std::vector<SignalSpec> roster;
    SignalSpec normal = base(0, "normal");
    normal.tone_amplitude = 1.0;
    roster.push_back(normal);

    SignalSpec irf = base(1, "IRF");
    irf.impacts = {inner(1.0)};
    roster.push_back(irf);

    SignalSpec irwf = base(2, "IRWF");
    irwf.impacts = {inner(p.weak_scale)};
    roster.push_back(irwf);

    SignalSpec orf = base(3, "ORF");
    orf.impacts = {outer(1.0)};
    roster.push_back(orf);

    SignalSpec orwf = base(4, "ORWF");
    orwf.impacts = {outer(p.weak_scale)};
    roster.push_back(orwf);

    SignalSpec iorf = base(5, "IORF");
    iorf.impacts = {inner(1.0), outer(1.0)};
    roster.push_back(iorf);

    SignalSpec iorwf = base(6, "IORWF");
    iorwf.impacts = {inner(p.weak_scale), outer(p.weak_scale)};
    roster.push_back(iorwf);

    return roster;
}

std::vector<double> generate_signal(const SignalSpec& spec, Rng rng) {
    spec.validate();
    const int n = spec.length;
    const double fs = spec.sample_rate;
    std::vector<double> x(n, 0.0);

    if (spec.tone_amplitude != 0.0) {
        const double ph = kTwoPi * spec.phase;
        for (int k = 0; k < n; ++k)
            x[k] += spec.tone_amplitude * std::sin(kTwoPi * spec.shaft_hz * k / fs + ph);
    }

    // RNG order is fixed: per train, one uniform for the initial phase, then
    // one per jittered interval; Gaussian floor noise drawn last.
    for (const ImpactTrain& train : spec.impacts) {
        const double period = 1.0 / train.fault_hz;
        // ring until decayed to 1e-6 of its onset amplitude
        const int ring_len =
            std::min(n, static_cast<int>(std::ceil(fs * std::log(1e6) / spec.damping)));
        double onset = std::fmod(rng.uniform() + spec.phase, 1.0) * period;
        const double t_end = n / fs;
        while (onset < t_end) {
            const int k0 = static_cast<int>(std::ceil(onset * fs));
            for (int k = k0; k < std::min(n, k0 + ring_len); ++k) {
                const double tau = k / fs - onset;
                double v = train.amplitude * std::exp(-spec.damping * tau) *
                           std::sin(kTwoPi * train.resonance_hz * tau);
                if (train.modulated)
                    v *= 1.0 + spec.modulation_depth *
                                   std::sin(kTwoPi * spec.shaft_hz * k / fs + kTwoPi * spec.phase);
                x[k] += v;
            }
            onset += period * (1.0 + spec.jitter * (2.0 * rng.uniform() - 1.0));
        }
    }

    if (spec.noise_floor > 0.0)
        for (int k = 0; k < n; ++k) x[k] += spec.noise_floor * rng.normal();

    return x;
}

std::vector<double> inject_noise(const std::vector<double>& signal, double snr_db, Rng rng) {
    if (std::isinf(snr_db) && snr_db > 0.0) return signal;  // no-noise sentinel
    double power = 0.0;
    for (double v : signal) power += v * v;
    power /= static_cast<double>(signal.size());
    if (power == 0.0) throw ConfigError("inject_noise: SNR undefined for an all-zero signal");
    const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    std::vector<double> out = signal;
    for (double& v : out) v += sigma * rng.normal();
    return out;
}

}  // namespace tft
