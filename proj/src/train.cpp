#include "tft/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tft/errors.hpp"

namespace tft {

AdamState::AdamState(const std::vector<std::pair<std::string, Tensor>>& registry) {
    m_.reserve(registry.size());
    v_.reserve(registry.size());
    for (const auto& [name, t] : registry) {
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
    }
}

void AdamState::step(std::vector<std::pair<std::string, Tensor>>& registry,
                     const AdamConfig& cfg) {
    if (registry.size() != m_.size()) throw ConfigError("adam: registry mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < registry.size(); ++p) {
        auto& [name, tensor] = registry[p];
        const auto& g = tensor.grad();
        auto& theta = tensor.data_mut();
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw NumericFault("adam: non-finite gradient in " + name);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

std::pair<double, double> eval_metrics(const TftParameters& params, const ModelConfig& cfg,
                                       const std::vector<TfrSample>& samples,
                                       double label_smoothing) {
    if (samples.empty()) return {0.0, 0.0};
    NoGradGuard no_grad;
    double loss = 0.0;
    long correct = 0;
    for (const TfrSample& s : samples) {
        auto res = forward(s.tfr, params, cfg);
        loss += smoothed_cross_entropy(res.probs, s.label, label_smoothing).item();
        int argmax = 0;
        for (int k = 1; k < cfg.n_cla; ++k)
            if (res.probs.data()[k] > res.probs.data()[argmax]) argmax = k;  // ties: lowest index
        if (argmax == s.label) ++correct;
    }
    return {loss / samples.size(), static_cast<double>(correct) / samples.size()};
}

TrainResult train(TftParameters& params, const ModelConfig& model_cfg,
                  const std::vector<TfrSample>& train_set, const std::vector<TfrSample>& val_set,
                  const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch) {
    if (train_set.empty()) throw ConfigError("train: empty training set");
    if (cfg.batch_size < 1 || cfg.max_epochs < 1) throw ConfigError("train: bad batch/epoch config");
    for (const TfrSample& s : train_set)
        if (s.label < 0 || s.label >= model_cfg.n_cla)
            throw ConfigError("train: label outside the configured class count");

    Rng shuffle_rng = Rng(cfg.seed).fork(1);
    Rng dropout_rng = Rng(cfg.seed).fork(2);
    AdamState adam(params.registry);
    TrainResult result;
    result.best_params = params.snapshot();

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        bool finite = true;
        try {
            for (std::size_t start = 0; start < order.size();
                 start += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t end =
                    std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
                params.zero_grads();
                Tensor batch_loss = Tensor::scalar(0.0);
                for (std::size_t i = start; i < end; ++i) {
                    const TfrSample& s = train_set[order[i]];
                    auto res = forward(s.tfr, params, model_cfg, true, &dropout_rng);
                    batch_loss = add(batch_loss, smoothed_cross_entropy(res.probs, s.label,
                                                                        cfg.label_smoothing));
                }
                batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - start));
                if (!std::isfinite(batch_loss.item())) {
                    finite = false;
                    break;
                }
                backward(batch_loss);
                adam.step(params.registry, cfg.adam);
            }
        } catch (const NumericFault&) {
            finite = false;
        }
        if (!finite) {
            result.diverged = true;  // best snapshot so far stays valid
            result.optimizer_steps = adam.steps();
            return result;
        }

        EpochStats stats;
        stats.epoch = epoch;
        std::tie(stats.train_loss, stats.train_acc) =
            eval_metrics(params, model_cfg, train_set, cfg.label_smoothing);
        std::tie(stats.val_loss, stats.val_acc) =
            eval_metrics(params, model_cfg, val_set, cfg.label_smoothing);
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);

        if (val_set.empty() ? stats.train_acc > result.best_val_acc
                            : stats.val_acc > result.best_val_acc) {
            result.best_val_acc = val_set.empty() ? stats.train_acc : stats.val_acc;
            result.best_epoch = epoch;
            result.best_params = params.snapshot();
        }
        if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 &&
            !cfg.periodic_path.empty())
            save_checkpoint(cfg.periodic_path, params, model_cfg);
        if (cfg.stop_at_full_train_acc && stats.train_acc >= 1.0) break;
        if (cfg.patience > 0 && result.best_epoch > 0 && epoch - result.best_epoch >= cfg.patience)
            break;
    }
    result.optimizer_steps = adam.steps();
    return result;
}

std::string history_bytes(const std::vector<EpochStats>& history) {
    std::ostringstream out;
    auto fmt = [](double v) {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    };
    for (const EpochStats& e : history)
        out << e.epoch << '\t' << fmt(e.train_loss) << '\t' << fmt(e.train_acc) << '\t'
            << fmt(e.val_loss) << '\t' << fmt(e.val_acc) << '\n';
    return out.str();
}

void write_history(const std::filesystem::path& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << history_bytes(history);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace tft
