#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tft/errors.hpp"
#include "tft/rng.hpp"

namespace tft {

class Tensor;

/// One node of the recorded computation graph. Children hold shared_ptrs to
/// their parents, so an op's inputs stay alive as long as any result does;
/// dropping the loss handle frees the whole graph except leaf parameters.
struct TensorNode {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized on first accumulation
    bool requires_grad = false;
    std::int64_t seq = 0;  // creation order; reverse order is a topological order
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backprop;

    bool tracked() const { return requires_grad || static_cast<bool>(backprop); }
    std::size_t numel() const { return value.size(); }
    void ensure_grad();
};

/// Dense row-major tensor of 64-bit floats with reverse-mode autodiff.
/// Value-semantics handle onto a shared node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(const std::vector<int>& shape);
    static Tensor full(const std::vector<int>& shape, double fill);
    static Tensor from_data(const std::vector<int>& shape, std::vector<double> data);
    static Tensor scalar(double v) { return from_data({1}, {v}); }

    const std::vector<int>& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::size_t numel() const { return node_->numel(); }
    int rows() const;
    int cols() const;

    const std::vector<double>& data() const { return node_->value; }
    std::vector<double>& data_mut() { return node_->value; }
    double item() const;
    double at(int r, int c) const;

    bool requires_grad() const { return node_->requires_grad; }
    /// Marks a leaf as trainable. Only valid on leaves (no recorded parents).
    Tensor& set_requires_grad(bool on);

    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<double>& grad() const;
    void zero_grad();

    bool defined() const { return static_cast<bool>(node_); }
    TensorNode* node() const { return node_.get(); }
    std::shared_ptr<TensorNode> node_ptr() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

/// Disables graph recording for its scope (eval-mode forward, finite-difference
/// probes). Nested guards are fine.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool autograd_enabled();

// ---- graph-building operations -------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, const std::vector<int>& shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double s);

/// Adds a length-n vector to every row of an m-by-n matrix (bias add).
Tensor add_rowvec(const Tensor& a, const Tensor& v);
/// Adds scalar e[t] to every entry of row t (1D position encoding broadcast).
Tensor add_pos1d(const Tensor& a, const Tensor& e);

Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor concat_cols(const std::vector<Tensor>& parts);

Tensor sum(const Tensor& a);        // -> scalar
Tensor mean(const Tensor& a);       // -> scalar
Tensor mean_rows(const Tensor& a);  // m-by-n -> 1-by-n

/// Numerically stable softmax over the last axis (max-subtracted).
Tensor softmax_lastaxis(const Tensor& a);

/// Layer normalization over the last axis with population variance:
/// (x - mean) / sqrt(var + eps) * gamma + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6);

enum class GeluMode { Erf, Tanh };

/// Gaussian error linear unit. Erf mode is x * Phi(x) exactly; Tanh mode is the
/// cubic tanh approximation.
Tensor gelu(const Tensor& x, GeluMode mode = GeluMode::Erf);

Tensor erf_op(const Tensor& x);
Tensor tanh_op(const Tensor& x);

/// Elementwise multiply by a fixed mask (dropout kernel; mask values are 0 or
/// the inverted-dropout keep scale).
Tensor apply_mask(const Tensor& x, const std::vector<double>& mask);

/// Inverted dropout: zero with probability r, scale survivors by 1/(1-r).
/// Identity when not training or r == 0.
Tensor dropout(const Tensor& x, double r, Rng& rng, bool training);

/// Label-smoothed cross entropy on a probability vector:
/// target q = (1-eps)*onehot(label) + eps/K, loss = -sum q_k ln(p_k + 1e-12).
Tensor smoothed_cross_entropy(const Tensor& probs, int label, double eps_ls);

/// The smoothing target vector itself (exposed for verification).
std::vector<double> smoothing_target(int label, int n_cla, double eps_ls);

// ---- gradients -------------------------------------------------------------

/// Reverse accumulation from a scalar loss. Gradients accumulate into every
/// tracked leaf; call zero_grad between batches.
void backward(const Tensor& loss);

// ---- construction helpers --------------------------------------------------

Tensor uniform_tensor(const std::vector<int>& shape, double lo, double hi, Rng& rng);
Tensor normal_tensor(const std::vector<int>& shape, double mean, double stddev, Rng& rng);

/// Throws NumericFault naming `context` if any entry is NaN/Inf.
void check_finite(const Tensor& t, const std::string& context);

}  // namespace tft
