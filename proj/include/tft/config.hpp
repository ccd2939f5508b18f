#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tft/dataset.hpp"
#include "tft/model.hpp"
#include "tft/signal.hpp"
#include "tft/train.hpp"
#include "tft/wavelet.hpp"

namespace tft {

/// Flat key=value configuration covering synthesis, SWT, model, and training.
/// Two built-in profiles: desk (small TFRs, minutes on one core) and paper
/// (full-scale reference structure, for audits rather than CPU training).
struct RunConfig {
    // synthetic fleet
    double sample_rate = 12800.0;
    int signal_length = 1024;
    double shaft_hz = 17.5;
    double bpfo_mult = 3.58;
    double bpfi_mult = 5.42;
    double resonance_inner_hz = 2400.0;
    double resonance_outer_hz = 3000.0;
    double damping = 600.0;
    double modulation_depth = 0.6;
    double noise_floor = 0.05;
    double weak_scale = 0.25;
    // dataset
    int classes = 7;
    std::vector<int> class_ids;  // overrides `classes` when non-empty
    long per_class = 32;
    int channels = 1;
    double snr_db = std::numeric_limits<double>::infinity();
    bool normalize = true;
    int out_h = 32;
    int out_w = 32;
    // wavelet plan
    double swt_omega0 = 6.0;
    int swt_voices = 16;
    double swt_fmin = 10.0;
    double swt_fmax = 6400.0;
    int swt_bins = 64;
    double swt_gamma_rel = 1e-8;
    // model
    int d_model = 32;
    int d_ff = 64;
    int heads = 4;
    int blocks = 2;
    double dropout_rate = 0.1;
    std::string pos_encoding = "1d";
    std::string gelu = "erf";
    int class_token_rows = 1;
    // training
    int batch_size = 16;
    int max_epochs = 80;
    double lr = 1e-3;
    double label_smoothing = 0.1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double f_train = 0.6;
    double f_val = 0.2;
    double f_test = 0.2;
    int checkpoint_every = 0;
    int patience = 0;
    // misc
    std::uint64_t seed = 42;
    std::vector<double> snr_list{20.0, 10.0, 5.0, 0.0, -5.0};
};

RunConfig profile_desk();
RunConfig profile_paper();
RunConfig profile_by_name(const std::string& name);

/// Applies `key = value` lines (# comments) on top of a config.
void apply_config_file(RunConfig& rc, const std::filesystem::path& path);
/// One `key=value` assignment (the --set flag).
void apply_override(RunConfig& rc, const std::string& assignment);
/// Serializes every key (the provenance file; parseable by apply_config_file).
std::string config_text(const RunConfig& rc);

/// Key table with desk/paper defaults for --help.
std::string config_reference();

// ---- derived objects ---------------------------------------------------------

FleetParams fleet_params(const RunConfig& rc);
WaveletPlan wavelet_plan(const RunConfig& rc);
/// Class specs: explicit class_ids when given, else the first `classes` roster
/// entries. Labels are re-compacted to 0..k-1 in roster order.
std::vector<SignalSpec> selected_specs(const RunConfig& rc);
DatasetParams dataset_params(const RunConfig& rc);
ModelConfig model_config(const RunConfig& rc, int n_cla);
TrainConfig train_config(const RunConfig& rc);

}  // namespace tft
