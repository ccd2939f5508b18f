#include "tft/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "tft/errors.hpp"

namespace tft {

namespace {

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

long ConfusionMatrix::total() const {
    long t = 0;
    for (long c : counts) t += c;
    return t;
}

double ConfusionMatrix::accuracy() const {
    const long t = total();
    if (t == 0) return 0.0;
    long trace = 0;
    for (int i = 0; i < n_cla; ++i) trace += at(i, i);
    return static_cast<double>(trace) / static_cast<double>(t);
}

std::string ConfusionMatrix::format(const std::vector<std::string>& class_names) const {
    std::vector<std::string> names(n_cla);
    std::size_t width = 5;
    for (int i = 0; i < n_cla; ++i) {
        names[i] = i < static_cast<int>(class_names.size()) ? class_names[i]
                                                            : "c" + std::to_string(i);
        width = std::max(width, names[i].size() + 1);
    }
    std::ostringstream out;
    out << std::string(width, ' ');
    for (int j = 0; j < n_cla; ++j) out << std::setw(static_cast<int>(width)) << names[j];
    out << "\n";
    for (int i = 0; i < n_cla; ++i) {
        out << std::setw(static_cast<int>(width)) << names[i];
        for (int j = 0; j < n_cla; ++j) out << std::setw(static_cast<int>(width)) << at(i, j);
        out << "\n";
    }
    return out.str();
}

std::pair<double, ConfusionMatrix> evaluate(const TftParameters& params, const ModelConfig& cfg,
                                            const std::vector<TfrSample>& samples) {
    ConfusionMatrix cm;
    cm.n_cla = cfg.n_cla;
    cm.counts.assign(static_cast<std::size_t>(cfg.n_cla) * cfg.n_cla, 0);
    NoGradGuard no_grad;
    for (const TfrSample& s : samples) {
        const std::vector<int> expect{cfg.n_t, cfg.n_f, cfg.c};
        if (s.tfr.shape() != expect) {
            std::ostringstream msg;
            msg << "evaluate: sample shape [";
            for (int d : s.tfr.shape()) msg << d << " ";
            msg << "] does not match model input [" << cfg.n_t << " " << cfg.n_f << " " << cfg.c
                << "]";
            throw ConfigError(msg.str());
        }
        if (s.label < 0 || s.label >= cfg.n_cla)
            throw ConfigError("evaluate: label outside the configured class count");
        auto res = forward(s.tfr, params, cfg);
        int argmax = 0;
        for (int k = 1; k < cfg.n_cla; ++k)
            if (res.probs.data()[k] > res.probs.data()[argmax]) argmax = k;
        ++cm.at(s.label, argmax);
    }
    return {cm.accuracy(), cm};
}

TrialStats aggregate_trials(const std::vector<double>& accuracies) {
    TrialStats stats;
    stats.accuracies = accuracies;
    if (accuracies.empty()) return stats;
    double sum = 0.0;
    stats.best = accuracies.front();
    for (double a : accuracies) {
        sum += a;
        stats.best = std::max(stats.best, a);
    }
    stats.mean = sum / accuracies.size();
    double var = 0.0;
    for (double a : accuracies) var += (a - stats.mean) * (a - stats.mean);
    stats.stddev = std::sqrt(var / accuracies.size());
    return stats;
}

TrialStats repeated_trials(int n_trials, std::uint64_t base_seed,
                           const std::function<double(std::uint64_t)>& recipe) {
    if (n_trials < 2) throw ConfigError("repeated_trials: need at least 2 trials");
    std::vector<double> accuracies;
    for (int i = 0; i < n_trials; ++i) {
        const std::uint64_t seed = Rng(base_seed).fork(static_cast<std::uint64_t>(i)).seed();
        try {
            accuracies.push_back(recipe(seed));
        } catch (const Error& e) {
            std::cerr << "warning: trial " << i << " failed and is excluded: " << e.what()
                      << "\n";
        }
    }
    return aggregate_trials(accuracies);
}

namespace {

std::vector<double> summed_block(const AttentionRecord& record, int block) {
    if (block < 0 || block >= static_cast<int>(record.weights.size()))
        throw ConfigError("attention block index out of range");
    const int n = record.n;
    std::vector<double> sum(static_cast<std::size_t>(n) * n, 0.0);
    for (const auto& head : record.weights[block])
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += head[i];
    return sum;
}

}  // namespace

std::vector<double> attention_summary(const AttentionRecord& record, int block) {
    const auto sum = summed_block(record, block);
    const int n = record.n;
    // class-token row: the attention the class token pays to each position
    std::vector<double> row(sum.begin(), sum.begin() + n);
    const auto [mn, mx] = std::minmax_element(row.begin(), row.end());
    const double lo = *mn, hi = *mx;
    if (hi == lo) return std::vector<double>(n, 0.0);
    for (double& v : row) v = (v - lo) / (hi - lo);
    return row;
}

void write_attention_pgm(const std::filesystem::path& path, const AttentionRecord& record,
                         int block) {
    const auto sum = summed_block(record, block);
    const int n = record.n;
    const auto [mn, mx] = std::minmax_element(sum.begin(), sum.end());
    const double lo = *mn, hi = *mx;
    std::ostringstream out;
    out << "P2\n" << n << " " << n << "\n255\n";
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double v = sum[static_cast<std::size_t>(i) * n + j];
            const int px = hi == lo ? 0 : static_cast<int>(std::lround(255.0 * (v - lo) / (hi - lo)));
            out << px << (j + 1 < n ? " " : "");
        }
        out << "\n";
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << out.str();
    if (!f) throw IoError("write failed: " + path.string());
}

std::string attention_summary_table(const std::vector<double>& summary) {
    std::ostringstream out;
    for (std::size_t i = 0; i < summary.size(); ++i)
        out << i << '\t' << fmt(summary[i]) << '\n';
    return out.str();
}

std::vector<std::pair<double, double>> snr_sweep(const TftParameters& params,
                                                 const ModelConfig& cfg,
                                                 const DatasetParams& generation,
                                                 const std::vector<ManifestRow>& test_rows,
                                                 const std::vector<double>& snr_list) {
    if (snr_list.empty()) throw ConfigError("snr_sweep: empty SNR list");
    std::vector<std::pair<double, double>> result;
    for (double snr : snr_list) {
        try {
            std::vector<TfrSample> regenerated;
            regenerated.reserve(test_rows.size());
            for (const ManifestRow& row : test_rows) {
                const SignalSpec* spec = nullptr;
                for (const SignalSpec& s : generation.specs)
                    if (s.class_id == row.label) spec = &s;
                if (!spec)
                    throw ConfigError("snr_sweep: no generation spec for label " +
                                      std::to_string(row.label));
                TfrSample s;
                s.tfr = synthesize_tfr(generation, *spec, row.seed, snr);
                s.label = row.label;
                s.class_name = row.class_name;
                s.rpm = row.rpm;
                s.snr_db = snr;
                s.seed = row.seed;
                regenerated.push_back(std::move(s));
            }
            result.emplace_back(snr, evaluate(params, cfg, regenerated).first);
        } catch (const Error& e) {
            std::cerr << "warning: SNR " << snr << " dB point failed: " << e.what() << "\n";
            result.emplace_back(snr, std::numeric_limits<double>::quiet_NaN());
        }
    }
    return result;
}

std::string snr_table(const std::vector<std::pair<double, double>>& sweep) {
    std::ostringstream out;
    for (const auto& [snr, acc] : sweep) out << fmt(snr) << '\t' << fmt(acc) << '\n';
    return out.str();
}

void export_hidden_features(const TftParameters& params, const ModelConfig& cfg,
                            const std::vector<TfrSample>& samples,
                            const std::filesystem::path& path) {
    NoGradGuard no_grad;
    std::ostringstream out;
    for (const TfrSample& s : samples) {
        auto res = forward(s.tfr, params, cfg);
        out << s.label << '\t' << fmt(s.rpm);
        for (double v : res.hidden.data()) out << '\t' << fmt(v);
        out << '\n';
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << out.str();
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace tft
