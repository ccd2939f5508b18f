#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tft/dataset.hpp"
#include "tft/model.hpp"

namespace tft {

struct ConfusionMatrix {
    int n_cla = 0;
    std::vector<long> counts;  // rows = true label, columns = predicted

    long& at(int truth, int predicted) { return counts[truth * n_cla + predicted]; }
    long at(int truth, int predicted) const { return counts[truth * n_cla + predicted]; }
    long total() const;
    double accuracy() const;  // trace / total
    /// UTF-8 grid with class-name headers.
    std::string format(const std::vector<std::string>& class_names) const;
};

/// Argmax classification over a sample set; ties break to the lowest index.
std::pair<double, ConfusionMatrix> evaluate(const TftParameters& params, const ModelConfig& cfg,
                                            const std::vector<TfrSample>& samples);

struct TrialStats {
    std::vector<double> accuracies;
    double mean = 0.0;
    double best = 0.0;
    double stddev = 0.0;  // population
};

TrialStats aggregate_trials(const std::vector<double>& accuracies);

/// Runs `recipe(trial_seed)` n times; a throwing trial is excluded from the
/// stats with a warning on stderr rather than aborting the batch.
TrialStats repeated_trials(int n_trials, std::uint64_t base_seed,
                           const std::function<double(std::uint64_t)>& recipe);

/// Sums the heads of one block, takes the class-token row, and min-max
/// normalizes to [0,1] (all-zero when the row is constant). block is 0-based.
std::vector<double> attention_summary(const AttentionRecord& record, int block);

/// Head-summed block matrix, min-max scaled to 0..255 as an ASCII PGM.
void write_attention_pgm(const std::filesystem::path& path, const AttentionRecord& record,
                         int block);

std::string attention_summary_table(const std::vector<double>& summary);

/// Per-SNR accuracy of a trained model on freshly regenerated test TFRs
/// (training distribution stays clean). A failed point is reported as NaN
/// accuracy and the sweep continues.
std::vector<std::pair<double, double>> snr_sweep(const TftParameters& params,
                                                 const ModelConfig& cfg,
                                                 const DatasetParams& generation,
                                                 const std::vector<ManifestRow>& test_rows,
                                                 const std::vector<double>& snr_list);

std::string snr_table(const std::vector<std::pair<double, double>>& sweep);

/// One row per sample: label<TAB>rpm<TAB>z_0..z_{d_model-1} (eval-mode class
/// token output of the last block).
void export_hidden_features(const TftParameters& params, const ModelConfig& cfg,
                            const std::vector<TfrSample>& samples,
                            const std::filesystem::path& path);

}  // namespace tft
