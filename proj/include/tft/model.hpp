#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tft/rng.hpp"
#include "tft/tensor.hpp"

namespace tft {

enum class PosMode { None, OneD, TwoD };

std::string to_string(PosMode mode);
PosMode pos_mode_from_string(const std::string& s);
std::string to_string(GeluMode mode);
GeluMode gelu_mode_from_string(const std::string& s);

struct ModelConfig {
    int n_t = 32;   // tokens (TFR time rows)
    int n_f = 32;   // TFR frequency columns
    int c = 1;      // channels
    int d_model = 32;
    int d_ff = 64;
    int h = 4;      // attention heads; d_k = d_v = d_model / h
    int n_blocks = 2;
    double r_dp = 0.1;
    PosMode pos_mode = PosMode::OneD;
    int n_cla = 7;
    GeluMode gelu_mode = GeluMode::Erf;
    // Rows of the stored class-token bank; the effective token is their mean.
    // 1 keeps a plain d_model vector. Some reference TensorFlow implementations
    // bake the training batch dimension into this variable, so 32 reproduces
    // their trainable-parameter totals.
    int class_token_rows = 1;

    void validate() const;
    int d_k() const { return d_model / h; }
    int patch_width() const { return n_f * c; }
};

/// Every trainable tensor, with a canonical name -> tensor registry used for
/// optimization, checkpoints, counting, and gradient checks.
struct BlockParams {
    // Projections are fused across heads (d_model x d_model). The key
    // projection is bias-free: softmax is shift-invariant, so a key bias would
    // be a structurally gradient-dead parameter.
    Tensor wq, bq, wk, wv, bv;
    Tensor wo, bo;
    Tensor ff_w1, ff_b1, ff_w2, ff_b2;
    Tensor ln1_g, ln1_b, ln2_g, ln2_b;
};

struct TftParameters {
    Tensor token_w, token_b;
    Tensor class_token;  // class_token_rows x d_model
    Tensor pos_1d;       // (n_t+1), OneD mode
    Tensor pos_2d;       // (n_t+1) x d_model, TwoD mode
    std::vector<BlockParams> blocks;
    Tensor cls_w1, cls_b1, cls_w2, cls_b2;
    std::vector<std::pair<std::string, Tensor>> registry;

    std::size_t total_entries() const;
    /// Deep copy of current values into a detached snapshot.
    std::vector<std::vector<double>> snapshot() const;
    void restore(const std::vector<std::vector<double>>& snap);
    void zero_grads();
};

TftParameters init_parameters(const ModelConfig& config, Rng rng);

/// Attention weights of every block and head: (n_t+1) x (n_t+1) row-stochastic
/// matrices, captured as plain values.
struct AttentionRecord {
    int n = 0;  // matrix side, n_t + 1
    std::vector<std::vector<std::vector<double>>> weights;  // [block][head][n*n]
};

struct ForwardResult {
    Tensor logits;  // 1 x n_cla
    Tensor probs;   // 1 x n_cla
    Tensor hidden;  // 1 x d_model, the class-token output of the last block
    AttentionRecord attention;
};

// ---- stages (exposed for tests) ----------------------------------------------

/// Flattens channels channel-minor (index f*c + ch) and projects: n_t x d_model.
Tensor tokenize(const Tensor& tfr, const TftParameters& params, const ModelConfig& config);

/// Prepends the class token and adds the position encoding: (n_t+1) x d_model.
Tensor assemble_input(const Tensor& tokens, const TftParameters& params,
                      const ModelConfig& config);

/// Scaled dot-product attention; returns (output, row-stochastic weights).
std::pair<Tensor, Tensor> single_head_attention(const Tensor& q, const Tensor& k,
                                                const Tensor& v);

/// Fused-projection multi-head attention; returns (output, per-head weights).
std::pair<Tensor, std::vector<Tensor>> multi_head_attention(const Tensor& x,
                                                            const BlockParams& block, int h);

Tensor transformer_block(const Tensor& z, const BlockParams& block, const ModelConfig& config,
                         bool training, Rng* rng, std::vector<Tensor>* attn_out);

/// Full forward pass on one TFR. Training mode applies dropout and requires an
/// rng; eval mode consumes no randomness.
ForwardResult forward(const Tensor& tfr, const TftParameters& params, const ModelConfig& config,
                      bool training = false, Rng* rng = nullptr);

// ---- structure audit ----------------------------------------------------------

struct ParamCount {
    std::vector<std::pair<std::string, long>> breakdown;
    long total = 0;
    std::string formula;
};

/// Closed-form trainable-entry count; equals init_parameters().total_entries().
ParamCount count_parameters(const ModelConfig& config);

// ---- checkpoints ---------------------------------------------------------------
// magic "TFTC", u32 version=1, u32 config-blob length, UTF-8 key=value lines,
// then per tensor: u32 name length, name, u32 rank, u32 dims, f32 LE data.

std::string checkpoint_bytes(const TftParameters& params, const ModelConfig& config);
void save_checkpoint(const std::filesystem::path& path, const TftParameters& params,
                     const ModelConfig& config);
std::pair<TftParameters, ModelConfig> load_checkpoint(const std::filesystem::path& path);

}  // namespace tft
