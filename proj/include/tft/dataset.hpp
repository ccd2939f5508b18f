#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tft/rng.hpp"
#include "tft/signal.hpp"
#include "tft/tensor.hpp"
#include "tft/wavelet.hpp"

namespace tft {

/// One manifest record:
/// path<TAB>label<TAB>class_name<TAB>rpm<TAB>snr_db<TAB>seed
struct ManifestRow {
    std::string path;  // relative to the manifest's directory
    int label = 0;
    std::string class_name;
    double rpm = 0.0;
    double snr_db = 0.0;  // +inf means clean
    std::uint64_t seed = 0;
};

/// A loaded sample: nonnegative TFR of shape n_t x n_f x c plus provenance.
struct TfrSample {
    Tensor tfr;
    int label = 0;
    std::string class_name;
    double rpm = 0.0;
    double snr_db = 0.0;
    std::uint64_t seed = 0;
};

// ---- TFR1 binary tensor format ---------------------------------------------
// magic "TFR1", u32 LE rank, rank u32 LE dims, row-major IEEE-754 f32 LE values.

void write_tfr(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tfr(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Loads the sample files behind manifest rows (paths resolved against the
/// manifest directory as recorded in each row's path).
std::vector<TfrSample> load_samples(const std::filesystem::path& manifest_dir,
                                    const std::vector<ManifestRow>& rows);

// ---- dataset construction ---------------------------------------------------

struct DatasetParams {
    std::vector<SignalSpec> specs;  // one per class
    long per_class = 32;
    int channels = 1;
    double snr_db = std::numeric_limits<double>::infinity();  // +inf = clean
    WaveletPlan plan;
    int out_h = 32;  // n_t
    int out_w = 32;  // n_f
    bool normalize = true;  // unit-peak scaling per sample
    std::uint64_t master_seed = 42;
};

/// Full pipeline per sample: synthesize (per channel, phase-shifted) ->
/// optional SNR noise -> CWT -> synchrosqueeze -> bicubic resize -> clamp at 0
/// -> stack channels -> persist. Returns the manifest (also written to
/// out_dir/manifest.tsv). Deterministic in master_seed.
std::vector<ManifestRow> build_dataset(const DatasetParams& params,
                                       const std::filesystem::path& out_dir);

/// Computes one sample's TFR without touching the filesystem (the SNR sweep
/// regenerates test samples through this).
Tensor synthesize_tfr(const DatasetParams& params, const SignalSpec& spec,
                      std::uint64_t sample_seed, double snr_db);

struct SplitResult {
    std::vector<ManifestRow> train, val, test;
};

/// Stratified split: per class, seeded shuffle then largest-remainder
/// apportionment across the three fractions. Every class must land at least
/// one sample in every split with a positive fraction.
SplitResult split_dataset(const std::vector<ManifestRow>& rows, double f_train, double f_val,
                          double f_test, Rng rng);

}  // namespace tft
