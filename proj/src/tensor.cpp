#include "tft/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace tft {

namespace {

thread_local bool g_autograd_enabled = true;
thread_local std::int64_t g_seq_counter = 0;

constexpr double kSqrt2 = 1.4142135623730950488016887242097;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599344;
constexpr double kSqrt2OverPi = 0.7978845608028653558798921198687;
constexpr double kGeluCubic = 0.044715;

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ConfigError("tensor extents must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::shared_ptr<TensorNode> new_node(std::vector<int> shape, std::vector<double> value) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->seq = ++g_seq_counter;
    return node;
}

/// Builds an op result; the backprop closure is attached only when recording.
Tensor make_op(std::vector<int> shape, std::vector<double> value,
               std::initializer_list<Tensor> parents,
               std::function<void(TensorNode&)> backprop) {
    auto node = new_node(std::move(shape), std::move(value));
    if (g_autograd_enabled) {
        bool tracked = false;
        for (const Tensor& p : parents) tracked = tracked || p.node()->tracked();
        if (tracked) {
            for (const Tensor& p : parents) node->parents.push_back(p.node_ptr());
            node->backprop = std::move(backprop);
        }
    }
    return Tensor(std::move(node));
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ConfigError(std::string(op) + ": rank-2 tensor required");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) throw ConfigError(std::string(op) + ": shape mismatch");
}

// Accumulates g into parent's grad buffer.
void accum(TensorNode& parent, std::size_t idx, double g) {
    parent.ensure_grad();
    parent.grad[idx] += g;
}

}  // namespace

void TensorNode::ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
}

bool autograd_enabled() { return g_autograd_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_autograd_enabled) { g_autograd_enabled = false; }
NoGradGuard::~NoGradGuard() { g_autograd_enabled = previous_; }

// ---- Tensor basics ----------------------------------------------------------

Tensor Tensor::zeros(const std::vector<int>& shape) {
    return Tensor(new_node(shape, std::vector<double>(shape_numel(shape), 0.0)));
}

Tensor Tensor::full(const std::vector<int>& shape, double fill) {
    return Tensor(new_node(shape, std::vector<double>(shape_numel(shape), fill)));
}

Tensor Tensor::from_data(const std::vector<int>& shape, std::vector<double> data) {
    if (shape_numel(shape) != data.size())
        throw ConfigError("from_data: shape does not match data length");
    return Tensor(new_node(shape, std::move(data)));
}

int Tensor::rows() const {
    if (rank() != 2) throw ConfigError("rows(): rank-2 tensor required");
    return node_->shape[0];
}

int Tensor::cols() const {
    if (rank() != 2) throw ConfigError("cols(): rank-2 tensor required");
    return node_->shape[1];
}

double Tensor::item() const {
    if (numel() != 1) throw ConfigError("item(): tensor is not scalar");
    return node_->value[0];
}

double Tensor::at(int r, int c) const {
    return node_->value[static_cast<std::size_t>(r) * cols() + c];
}

Tensor& Tensor::set_requires_grad(bool on) {
    if (on && node_->backprop) throw ConfigError("set_requires_grad: not a leaf tensor");
    node_->requires_grad = on;
    return *this;
}

const std::vector<double>& Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

// ---- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const int m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2) throw ConfigError("matmul: inner extents disagree");
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    const auto& av = a.data();
    const auto& bv = b.data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = av[static_cast<std::size_t>(i) * k + p];
            if (aip == 0.0) continue;
            const std::size_t brow = static_cast<std::size_t>(p) * n;
            const std::size_t orow = static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) out[orow + j] += aip * bv[brow + j];
        }
    }
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return make_op({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](TensorNode& self) {
        // dA = g B^T, dB = A^T g
        if (an->tracked()) {
            an->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (int j = 0; j < n; ++j)
                        s += self.grad[static_cast<std::size_t>(i) * n + j] *
                             bn->value[static_cast<std::size_t>(p) * n + j];
                    an->grad[static_cast<std::size_t>(i) * k + p] += s;
                }
        }
        if (bn->tracked()) {
            bn->ensure_grad();
            for (int p = 0; p < k; ++p)
                for (int j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < m; ++i)
                        s += an->value[static_cast<std::size_t>(i) * k + p] *
                             self.grad[static_cast<std::size_t>(i) * n + j];
                    bn->grad[static_cast<std::size_t>(p) * n + j] += s;
                }
        }
    });
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const int m = a.rows(), n = a.cols();
    std::vector<double> out(a.numel());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j) * m + i] = a.data()[static_cast<std::size_t>(i) * n + j];
    auto an = a.node_ptr();
    return make_op({n, m}, std::move(out), {a}, [an, m, n](TensorNode& self) {
        if (!an->tracked()) return;
        an->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                an->grad[static_cast<std::size_t>(i) * n + j] +=
                    self.grad[static_cast<std::size_t>(j) * m + i];
    });
}

Tensor reshape(const Tensor& a, const std::vector<int>& shape) {
    if (shape_numel(shape) != a.numel()) throw ConfigError("reshape: element count changes");
    auto an = a.node_ptr();
    return make_op(shape, a.data(), {a}, [an](TensorNode& self) {
        if (!an->tracked()) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    });
}

namespace {

Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name,
                          double (*fwd)(double, double),
                          void (*bwd)(TensorNode&, TensorNode&, TensorNode&, std::size_t)) {
    require_same_shape(a, b, name);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i], b.data()[i]);
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return make_op(a.shape(), std::move(out), {a, b}, [an, bn, bwd](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) bwd(self, *an, *bn, i);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "add", [](double x, double y) { return x + y; },
        [](TensorNode& self, TensorNode& an, TensorNode& bn, std::size_t i) {
            if (an.tracked()) accum(an, i, self.grad[i]);
            if (bn.tracked()) accum(bn, i, self.grad[i]);
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](TensorNode& self, TensorNode& an, TensorNode& bn, std::size_t i) {
            if (an.tracked()) accum(an, i, self.grad[i]);
            if (bn.tracked()) accum(bn, i, -self.grad[i]);
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](TensorNode& self, TensorNode& an, TensorNode& bn, std::size_t i) {
            if (an.tracked()) accum(an, i, self.grad[i] * bn.value[i]);
            if (bn.tracked()) accum(bn, i, self.grad[i] * an.value[i]);
        });
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
    auto an = a.node_ptr();
    return make_op(a.shape(), std::move(out), {a}, [an, s](TensorNode& self) {
        if (!an->tracked()) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += s * self.grad[i];
    });
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    require_rank2(a, "add_rowvec");
    const int m = a.rows(), n = a.cols();
    if (static_cast<int>(v.numel()) != n) throw ConfigError("add_rowvec: vector length mismatch");
    std::vector<double> out(a.numel());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * n + j;
            out[idx] = a.data()[idx] + v.data()[j];
        }
    auto an = a.node_ptr();
    auto vn = v.node_ptr();
    return make_op({m, n}, std::move(out), {a, v}, [an, vn, m, n](TensorNode& self) {
        if (an->tracked()) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (vn->tracked()) {
            vn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    vn->grad[j] += self.grad[static_cast<std::size_t>(i) * n + j];
        }
    });
}

Tensor add_pos1d(const Tensor& a, const Tensor& e) {
    require_rank2(a, "add_pos1d");
    const int m = a.rows(), n = a.cols();
    if (static_cast<int>(e.numel()) != m) throw ConfigError("add_pos1d: encoding length mismatch");
    std::vector<double> out(a.numel());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * n + j;
            out[idx] = a.data()[idx] + e.data()[i];
        }
    auto an = a.node_ptr();
    auto en = e.node_ptr();
    return make_op({m, n}, std::move(out), {a, e}, [an, en, m, n](TensorNode& self) {
        if (an->tracked()) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (en->tracked()) {
            en->ensure_grad();
            for (int i = 0; i < m; ++i) {
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += self.grad[static_cast<std::size_t>(i) * n + j];
                en->grad[i] += s;
            }
        }
    });
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
    require_rank2(a, "slice_rows");
    const int m = a.rows(), n = a.cols();
    if (r0 < 0 || r1 > m || r0 >= r1) throw ConfigError("slice_rows: bad range");
    std::vector<double> out(a.data().begin() + static_cast<std::size_t>(r0) * n,
                            a.data().begin() + static_cast<std::size_t>(r1) * n);
    auto an = a.node_ptr();
    return make_op({r1 - r0, n}, std::move(out), {a}, [an, r0, n](TensorNode& self) {
        if (!an->tracked()) return;
        an->ensure_grad();
        const std::size_t base = static_cast<std::size_t>(r0) * n;
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[base + i] += self.grad[i];
    });
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    require_rank2(a, "slice_cols");
    const int m = a.rows(), n = a.cols();
    if (c0 < 0 || c1 > n || c0 >= c1) throw ConfigError("slice_cols: bad range");
    const int w = c1 - c0;
    std::vector<double> out(static_cast<std::size_t>(m) * w);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j)
            out[static_cast<std::size_t>(i) * w + j] =
                a.data()[static_cast<std::size_t>(i) * n + c0 + j];
    auto an = a.node_ptr();
    return make_op({m, w}, std::move(out), {a}, [an, c0, m, n, w](TensorNode& self) {
        if (!an->tracked()) return;
        an->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j)
                an->grad[static_cast<std::size_t>(i) * n + c0 + j] +=
                    self.grad[static_cast<std::size_t>(i) * w + j];
    });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    require_rank2(a, "concat_rows");
    require_rank2(b, "concat_rows");
    if (a.cols() != b.cols()) throw ConfigError("concat_rows: column mismatch");
    const int ma = a.rows(), mb = b.rows(), n = a.cols();
    std::vector<double> out;
    out.reserve(a.numel() + b.numel());
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return make_op({ma + mb, n}, std::move(out), {a, b}, [an, bn, ma, n](TensorNode& self) {
        const std::size_t split = static_cast<std::size_t>(ma) * n;
        if (an->tracked()) {
            an->ensure_grad();
            for (std::size_t i = 0; i < split; ++i) an->grad[i] += self.grad[i];
        }
        if (bn->tracked()) {
            bn->ensure_grad();
            for (std::size_t i = split; i < self.grad.size(); ++i)
                bn->grad[i - split] += self.grad[i];
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ConfigError("concat_cols: nothing to concatenate");
    const int m = parts.front().rows();
    int n = 0;
    for (const Tensor& p : parts) {
        require_rank2(p, "concat_cols");
        if (p.rows() != m) throw ConfigError("concat_cols: row mismatch");
        n += p.cols();
    }
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    int off = 0;
    for (const Tensor& p : parts) {
        const int w = p.cols();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j)
                out[static_cast<std::size_t>(i) * n + off + j] =
                    p.data()[static_cast<std::size_t>(i) * w + j];
        off += w;
    }
    // make_op takes an initializer_list; build the node by hand for the variadic case
    auto node = new_node({m, n}, std::move(out));
    if (g_autograd_enabled) {
        bool tracked = false;
        for (const Tensor& p : parts) tracked = tracked || p.node()->tracked();
        if (tracked) {
            std::vector<std::shared_ptr<TensorNode>> pn;
            std::vector<int> widths;
            for (const Tensor& p : parts) {
                node->parents.push_back(p.node_ptr());
                pn.push_back(p.node_ptr());
                widths.push_back(p.cols());
            }
            node->backprop = [pn, widths, m, n](TensorNode& self) {
                int off2 = 0;
                for (std::size_t k = 0; k < pn.size(); ++k) {
                    const int w = widths[k];
                    if (pn[k]->tracked()) {
                        pn[k]->ensure_grad();
                        for (int i = 0; i < m; ++i)
                            for (int j = 0; j < w; ++j)
                                pn[k]->grad[static_cast<std::size_t>(i) * w + j] +=
                                    self.grad[static_cast<std::size_t>(i) * n + off2 + j];
                    }
                    off2 += w;
                }
            };
        }
    }
    return Tensor(std::move(node));
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    auto an = a.node_ptr();
    return make_op({1}, {s}, {a}, [an](TensorNode& self) {
        if (!an->tracked()) return;
        an->ensure_grad();
        const double g = self.grad[0];
        for (double& gv : an->grad) gv += g;
    });
}

Tensor mean(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    const double inv = 1.0 / static_cast<double>(a.numel());
    auto an = a.node_ptr();
    return make_op({1}, {s * inv}, {a}, [an, inv](TensorNode& self) {
        if (!an->tracked()) return;
        an->ensure_grad();
        const double g = self.grad[0] * inv;
        for (double& gv : an->grad) gv += g;
    });
}

Tensor mean_rows(const Tensor& a) {
    require_rank2(a, "mean_rows");
    const int m = a.rows(), n = a.cols();
    const double inv = 1.0 / static_cast<double>(m);
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[j] += a.data()[static_cast<std::size_t>(i) * n + j];
    for (double& v : out) v *= inv;
    auto an = a.node_ptr();
    return make_op({1, n}, std::move(out), {a}, [an, m, n, inv](TensorNode& self) {
        if (!an->tracked()) return;
        an->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                an->grad[static_cast<std::size_t>(i) * n + j] += self.grad[j] * inv;
    });
}

Tensor softmax_lastaxis(const Tensor& a) {
    if (a.rank() < 1) throw ConfigError("softmax_lastaxis: rank >= 1 required");
    const int n = a.shape().back();
    const std::size_t slices = a.numel() / n;
    std::vector<double> out(a.numel());
    for (std::size_t s = 0; s < slices; ++s) {
        const std::size_t base = s * n;
        double mx = a.data()[base];
        for (int j = 1; j < n; ++j) mx = std::max(mx, a.data()[base + j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            out[base + j] = std::exp(a.data()[base + j] - mx);
            z += out[base + j];
        }
        const double invz = 1.0 / z;
        for (int j = 0; j < n; ++j) out[base + j] *= invz;
    }
    auto an = a.node_ptr();
    auto shape = a.shape();
    return make_op(std::move(shape), std::move(out), {a}, [an, n, slices](TensorNode& self) {
        if (!an->tracked()) return;
        an->ensure_grad();
        for (std::size_t s = 0; s < slices; ++s) {
            const std::size_t base = s * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += self.grad[base + j] * self.value[base + j];
            for (int j = 0; j < n; ++j)
                an->grad[base + j] += self.value[base + j] * (self.grad[base + j] - dot);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() < 1) throw ConfigError("layer_norm: rank >= 1 required");
    if (eps <= 0.0) throw ConfigError("layer_norm: eps must be positive");
    const int d = x.shape().back();
    if (static_cast<int>(gamma.numel()) != d || static_cast<int>(beta.numel()) != d)
        throw ConfigError("layer_norm: gamma/beta length mismatch");
    const std::size_t slices = x.numel() / d;
    std::vector<double> out(x.numel());
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(slices);
    for (std::size_t s = 0; s < slices; ++s) {
        const std::size_t base = s * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += x.data()[base + j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = x.data()[base + j] - mu;
            var += c * c;
        }
        var /= d;
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[s] = inv;
        for (int j = 0; j < d; ++j) {
            xhat[base + j] = (x.data()[base + j] - mu) * inv;
            out[base + j] = xhat[base + j] * gamma.data()[j] + beta.data()[j];
        }
    }
    auto xn = x.node_ptr();
    auto gn = gamma.node_ptr();
    auto bn = beta.node_ptr();
    auto shape = x.shape();
    return make_op(std::move(shape), std::move(out), {x, gamma, beta},
                   [xn, gn, bn, d, slices, xhat = std::move(xhat),
                    inv_std = std::move(inv_std)](TensorNode& self) {
                       for (std::size_t s = 0; s < slices; ++s) {
                           const std::size_t base = s * d;
                           if (gn->tracked()) {
                               gn->ensure_grad();
                               for (int j = 0; j < d; ++j)
                                   gn->grad[j] += self.grad[base + j] * xhat[base + j];
                           }
                           if (bn->tracked()) {
                               bn->ensure_grad();
                               for (int j = 0; j < d; ++j) bn->grad[j] += self.grad[base + j];
                           }
                           if (xn->tracked()) {
                               xn->ensure_grad();
                               double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                               for (int j = 0; j < d; ++j) {
                                   const double dxhat = self.grad[base + j] * gn->value[j];
                                   mean_dxhat += dxhat;
                                   mean_dxhat_xhat += dxhat * xhat[base + j];
                               }
                               mean_dxhat /= d;
                               mean_dxhat_xhat /= d;
                               for (int j = 0; j < d; ++j) {
                                   const double dxhat = self.grad[base + j] * gn->value[j];
                                   xn->grad[base + j] +=
                                       inv_std[s] *
                                       (dxhat - mean_dxhat - xhat[base + j] * mean_dxhat_xhat);
                               }
                           }
                       }
                   });
}

namespace {

Tensor unary_op(const Tensor& x, double (*fwd)(double), double (*deriv)(double)) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x.data()[i]);
    auto xn = x.node_ptr();
    return make_op(x.shape(), std::move(out), {x}, [xn, deriv](TensorNode& self) {
        if (!xn->tracked()) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            xn->grad[i] += self.grad[i] * deriv(xn->value[i]);
    });
}

double gelu_erf_fwd(double v) { return 0.5 * v * (1.0 + std::erf(v / kSqrt2)); }
double gelu_erf_deriv(double v) {
    const double phi_cdf = 0.5 * (1.0 + std::erf(v / kSqrt2));
    const double phi_pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    return phi_cdf + v * phi_pdf;
}
double gelu_tanh_fwd(double v) {
    const double u = kSqrt2OverPi * (v + kGeluCubic * v * v * v);
    return 0.5 * v * (1.0 + std::tanh(u));
}
double gelu_tanh_deriv(double v) {
    const double u = kSqrt2OverPi * (v + kGeluCubic * v * v * v);
    const double t = std::tanh(u);
    const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCubic * v * v);
    return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
}

}  // namespace

Tensor gelu(const Tensor& x, GeluMode mode) {
    return mode == GeluMode::Erf ? unary_op(x, gelu_erf_fwd, gelu_erf_deriv)
                                 : unary_op(x, gelu_tanh_fwd, gelu_tanh_deriv);
}

Tensor erf_op(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::erf(v); },
        [](double v) { return 1.1283791670955125738961589031215 * std::exp(-v * v); });
}

Tensor tanh_op(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::tanh(v); },
        [](double v) {
            const double t = std::tanh(v);
            return 1.0 - t * t;
        });
}

Tensor apply_mask(const Tensor& x, const std::vector<double>& mask) {
    if (mask.size() != x.numel()) throw ConfigError("apply_mask: mask length mismatch");
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * mask[i];
    auto xn = x.node_ptr();
    return make_op(x.shape(), std::move(out), {x}, [xn, mask](TensorNode& self) {
        if (!xn->tracked()) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] * mask[i];
    });
}

Tensor dropout(const Tensor& x, double r, Rng& rng, bool training) {
    if (r < 0.0 || r >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
    if (!training || r == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - r);
    std::vector<double> mask(x.numel());
    for (double& m : mask) m = (rng.uniform() < r) ? 0.0 : keep_scale;
    return apply_mask(x, mask);
}

std::vector<double> smoothing_target(int label, int n_cla, double eps_ls) {
    if (label < 0 || label >= n_cla) throw ConfigError("label out of range");
    if (eps_ls < 0.0 || eps_ls >= 1.0) throw ConfigError("label smoothing must be in [0, 1)");
    std::vector<double> q(n_cla, eps_ls / n_cla);
    q[label] += 1.0 - eps_ls;
    return q;
}

Tensor smoothed_cross_entropy(const Tensor& probs, int label, double eps_ls) {
    const int k = static_cast<int>(probs.numel());
    const std::vector<double> q = smoothing_target(label, k, eps_ls);
    double total = 0.0;
    for (int j = 0; j < k; ++j) total += probs.data()[j];
    if (std::abs(total - 1.0) > 1e-6)
        throw ConfigError("smoothed_cross_entropy: probabilities do not sum to 1");
    double loss = 0.0;
    // the 1e-12 guard keeps log finite at p=0; capping at 1 keeps the loss
    // nonnegative when a probability is exactly 1
    for (int j = 0; j < k; ++j)
        loss -= q[j] * std::log(std::min(probs.data()[j] + 1e-12, 1.0));
    auto pn = probs.node_ptr();
    return make_op({1}, {loss}, {probs}, [pn, q](TensorNode& self) {
        if (!pn->tracked()) return;
        pn->ensure_grad();
        const double g = self.grad[0];
        for (std::size_t j = 0; j < q.size(); ++j)
            pn->grad[j] -= g * q[j] / (pn->value[j] + 1e-12);
    });
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw ConfigError("backward: loss must be scalar");
    if (!loss.node()->tracked())
        throw ConfigError("backward: loss is not connected to any tracked tensor");

    // Gather the reachable subgraph, then replay in reverse creation order.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<TensorNode*> stack{loss.node()};
    seen.insert(loss.node());
    while (!stack.empty()) {
        TensorNode* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents)
            if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](const TensorNode* a, const TensorNode* b) { return a->seq > b->seq; });

    // Interior gradients are scratch for this pass; only leaves accumulate
    // across calls, so repeated backward without a reset doubles leaf grads.
    for (TensorNode* n : order)
        if (n->backprop) n->grad.assign(n->value.size(), 0.0);

    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (TensorNode* n : order)
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
}

Tensor uniform_tensor(const std::vector<int>& shape, double lo, double hi, Rng& rng) {
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.uniform(lo, hi);
    return Tensor::from_data(shape, std::move(data));
}

Tensor normal_tensor(const std::vector<int>& shape, double mean, double stddev, Rng& rng) {
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.normal(mean, stddev);
    return Tensor::from_data(shape, std::move(data));
}

void check_finite(const Tensor& t, const std::string& context) {
    for (double v : t.data())
        if (!std::isfinite(v)) throw NumericFault(context + ": non-finite value");
}

}  // namespace tft
