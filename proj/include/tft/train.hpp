#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tft/dataset.hpp"
#include "tft/model.hpp"

namespace tft {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    int batch_size = 16;
    int max_epochs = 80;
    AdamConfig adam;
    double label_smoothing = 0.1;
    std::uint64_t seed = 1;
    int checkpoint_every = 0;  // epochs; 0 disables periodic checkpoints
    int patience = 0;          // early stop after this many stale epochs; 0 disables
    bool stop_at_full_train_acc = false;
    std::filesystem::path periodic_path;  // target of checkpoint_every
};

/// Adam moment buffers aligned with a parameter registry.
class AdamState {
public:
    explicit AdamState(const std::vector<std::pair<std::string, Tensor>>& registry);

    /// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps), from tensor.grad().
    /// Throws NumericFault naming the parameter on a non-finite gradient.
    void step(std::vector<std::pair<std::string, Tensor>>& registry, const AdamConfig& cfg);

    long steps() const { return t_; }

private:
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0, train_acc = 0.0;
    double val_loss = 0.0, val_acc = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    std::vector<std::vector<double>> best_params;  // snapshot at best val accuracy
    int best_epoch = -1;
    double best_val_acc = -1.0;
    long optimizer_steps = 0;
    bool diverged = false;
};

/// Eval-mode mean loss and accuracy over a set (no rng, no dropout).
std::pair<double, double> eval_metrics(const TftParameters& params, const ModelConfig& cfg,
                                       const std::vector<TfrSample>& samples,
                                       double label_smoothing);

/// Epoch loop: seeded shuffle, loss-mean minibatches (partial final batch
/// kept), backward, Adam step; eval-mode train/val metrics per epoch; best
/// checkpoint selected by validation accuracy. On divergence (non-finite
/// loss) training stops with the best snapshot retained and diverged set.
TrainResult train(TftParameters& params, const ModelConfig& model_cfg,
                  const std::vector<TfrSample>& train_set, const std::vector<TfrSample>& val_set,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochStats&)>& on_epoch = nullptr);

std::string history_bytes(const std::vector<EpochStats>& history);
void write_history(const std::filesystem::path& path, const std::vector<EpochStats>& history);

}  // namespace tft
