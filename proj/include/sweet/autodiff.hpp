#pragma once

// Reverse-mode differentiation over a static tape. A tape is rebuilt for
// every forward pass; nodes are appended in evaluation order, so the node
// sequence is already topologically sorted.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sweet/errors.hpp"
#include "sweet/rng.hpp"
#include "sweet/tensor.hpp"

namespace sweet {

using ParamMap = std::map<std::string, DenseTensor>;

namespace ad {

struct Var {
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    std::size_t id = npos;
    [[nodiscard]] bool valid() const noexcept { return id != npos; }
};

class Tape;

using BackwardFn = std::function<void(Tape&, const DenseTensor& out_grad)>;

class Tape {
public:
    Var constant(DenseTensor value) { return push(std::move(value), false, nullptr); }

    Var parameter(const std::string& name, DenseTensor value) {
        if (params_.count(name)) throw ArgumentError("parameter registered twice: " + name);
        Var v = push(std::move(value), true, nullptr);
        params_.emplace(name, v.id);
        return v;
    }

    // Appends an op result. `fn` is dropped when no input requires a gradient.
    Var push_op(DenseTensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
        bool rg = false;
        for (Var in : inputs) rg = rg || nodes_.at(in.id).requires_grad;
        return push(std::move(value), rg, rg ? std::move(fn) : nullptr);
    }
    Var push_op(DenseTensor value, const std::vector<Var>& inputs, BackwardFn fn) {
        bool rg = false;
        for (Var in : inputs) rg = rg || nodes_.at(in.id).requires_grad;
        return push(std::move(value), rg, rg ? std::move(fn) : nullptr);
    }

    [[nodiscard]] const DenseTensor& value(Var v) const { return nodes_.at(v.id).value; }
    [[nodiscard]] bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] const std::map<std::string, std::size_t>& parameters() const noexcept { return params_; }

    // Gradient accumulator for `v`, allocated as zeros on first use.
    std::span<double> grad(Var v) {
        Node& n = nodes_.at(v.id);
        if (n.grad.empty()) n.grad = DenseTensor(n.value.shape(), 0.0);
        return n.grad.data();
    }

    [[nodiscard]] const DenseTensor& grad_value(Var v) const { return nodes_.at(v.id).grad; }

    void zero_grads() {
        for (Node& n : nodes_) n.grad = DenseTensor();
    }

    // Runs the backward closures in reverse order from a seeded loss gradient.
    void run_backward(Var loss) {
        zero_grads();
        grad(loss)[0] = 1.0;
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.backward || n.grad.empty()) continue;
            n.backward(*this, n.grad);
        }
    }

private:
    struct Node {
        DenseTensor value;
        DenseTensor grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Var push(DenseTensor value, bool requires_grad, BackwardFn fn) {
        nodes_.push_back(Node{std::move(value), DenseTensor(), requires_grad, std::move(fn)});
        return Var{nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
    std::map<std::string, std::size_t> params_;
};

// Gradients of a scalar loss with respect to every registered parameter.
// Parameters that do not influence the loss receive exact zeros.
inline ParamMap backward(Tape& tape, Var loss) {
    if (tape.value(loss).size() != 1)
        throw ArgumentError("backward: loss must be a scalar, got shape " + shape_string(tape.value(loss).shape()));
    tape.run_backward(loss);
    ParamMap grads;
    for (const auto& [name, id] : tape.parameters()) {
        const DenseTensor& g = tape.grad_value(Var{id});
        grads.emplace(name, g.empty() ? DenseTensor(tape.value(Var{id}).shape(), 0.0) : g);
    }
    return grads;
}

namespace detail {

inline std::size_t rows_of(const DenseTensor& t) { return t.size() / t.shape().back(); }
inline std::size_t cols_of(const DenseTensor& t) { return t.shape().back(); }

inline void require_matrix(const DenseTensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

inline void require_same_shape(const DenseTensor& a, const DenseTensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
}

inline void add_into(std::span<double> dst, std::span<const double> src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

// ---- linear algebra -------------------------------------------------------

inline Var matmul(Tape& t, Var a, Var b) {
    const DenseTensor& av = t.value(a);
    const DenseTensor& bv = t.value(b);
    detail::require_matrix(av, "matmul");
    detail::require_matrix(bv, "matmul");
    const std::size_t m = av.extent(0), k = av.extent(1), n = bv.extent(1);
    if (bv.extent(0) != k)
        throw ShapeError("matmul: inner extents differ (" + std::to_string(k) + " vs " +
                         std::to_string(bv.extent(0)) + ")");
    DenseTensor out({m, n});
    kernels::gemm_nn(m, n, k, av.data().data(), bv.data().data(), out.data().data());
    return t.push_op(std::move(out), {a, b}, [a, b, m, n, k](Tape& tp, const DenseTensor& g) {
        if (tp.requires_grad(a))
            kernels::gemm_nt(m, k, n, g.data().data(), tp.value(b).data().data(), tp.grad(a).data());
        if (tp.requires_grad(b))
            kernels::gemm_tn(k, n, m, tp.value(a).data().data(), g.data().data(), tp.grad(b).data());
    });
}

// T x_mode M for a 3-D tensor T (mode is 1-based).
inline Var mode_product(Tape& t, Var tensor, Var matrix, int mode) {
    const DenseTensor& tv = t.value(tensor);
    const DenseMatrix mv = DenseMatrix::from_tensor(t.value(matrix));
    DenseTensor out = mode_n_product(tv, mv, mode);
    const Shape in_shape = tv.shape();
    return t.push_op(std::move(out), {tensor, matrix}, [tensor, matrix, mode, in_shape](Tape& tp, const DenseTensor& g) {
        // Y_(n) = M T_(n)  =>  dM = dY_(n) T_(n)^T,  dT_(n) = M^T dY_(n)
        const DenseMatrix gy = unfold(g, mode);
        if (tp.requires_grad(matrix)) {
            const DenseMatrix tn = unfold(tp.value(tensor), mode);
            kernels::gemm_nt(gy.rows(), tn.rows(), gy.cols(), gy.data().data(), tn.data().data(),
                             tp.grad(matrix).data());
        }
        if (tp.requires_grad(tensor)) {
            const DenseTensor& mt = tp.value(matrix);
            DenseMatrix dtn(mt.extent(1), gy.cols());
            kernels::gemm_tn(mt.extent(1), gy.cols(), mt.extent(0), mt.data().data(), gy.data().data(),
                             dtn.data().data());
            const DenseTensor dt = fold(dtn, mode, in_shape);
            detail::add_into(tp.grad(tensor), dt.data());
        }
    });
}

// ---- elementwise ----------------------------------------------------------

inline Var add(Tape& t, Var a, Var b) {
    detail::require_same_shape(t.value(a), t.value(b), "add");
    DenseTensor out = t.value(a);
    detail::add_into(out.data(), t.value(b).data());
    return t.push_op(std::move(out), {a, b}, [a, b](Tape& tp, const DenseTensor& g) {
        if (tp.requires_grad(a)) detail::add_into(tp.grad(a), g.data());
        if (tp.requires_grad(b)) detail::add_into(tp.grad(b), g.data());
    });
}

// x (rows x n) + bias broadcast over rows; bias has n elements.
inline Var add_bias(Tape& t, Var x, Var bias) {
    const DenseTensor& xv = t.value(x);
    const std::size_t n = detail::cols_of(xv), rows = detail::rows_of(xv);
    if (t.value(bias).size() != n)
        throw ShapeError("add_bias: bias length " + std::to_string(t.value(bias).size()) + " vs width " +
                         std::to_string(n));
    DenseTensor out = xv;
    const auto bv = t.value(bias).data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bv[c];
    return t.push_op(std::move(out), {x, bias}, [x, bias, rows, n](Tape& tp, const DenseTensor& g) {
        if (tp.requires_grad(x)) detail::add_into(tp.grad(x), g.data());
        if (tp.requires_grad(bias)) {
            auto gb = tp.grad(bias);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
        }
    });
}

inline Var mul(Tape& t, Var a, Var b) {
    detail::require_same_shape(t.value(a), t.value(b), "mul");
    DenseTensor out = t.value(a);
    const auto bv = t.value(b).data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return t.push_op(std::move(out), {a, b}, [a, b](Tape& tp, const DenseTensor& g) {
        if (tp.requires_grad(a)) {
            auto ga = tp.grad(a);
            const auto bv = tp.value(b).data();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (tp.requires_grad(b)) {
            auto gb = tp.grad(b);
            const auto av = tp.value(a).data();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

inline Var scale(Tape& t, Var a, double factor) {
    DenseTensor out = t.value(a);
    for (double& v : out.data()) v *= factor;
    return t.push_op(std::move(out), {a}, [a, factor](Tape& tp, const DenseTensor& g) {
        auto ga = tp.grad(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * g[i];
    });
}

inline Var sum(Tape& t, Var a) {
    double s = 0.0;
    for (double v : t.value(a).data()) s += v;
    return t.push_op(DenseTensor({1}, std::vector<double>{s}), {a}, [a](Tape& tp, const DenseTensor& g) {
        for (double& v : tp.grad(a)) v += g[0];
    });
}

inline Var reshape(Tape& t, Var a, Shape shape) {
    DenseTensor out = t.value(a).reshaped(std::move(shape));
    return t.push_op(std::move(out), {a}, [a](Tape& tp, const DenseTensor& g) {
        detail::add_into(tp.grad(a), g.data());
    });
}

namespace detail {

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

inline double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

inline double gelu_grad(double x) {
    const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
    return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// GELU, tanh approximation.
inline Var gelu(Tape& t, Var a) {
    DenseTensor out = t.value(a);
    for (double& v : out.data()) v = detail::gelu(v);
    return t.push_op(std::move(out), {a}, [a](Tape& tp, const DenseTensor& g) {
        auto ga = tp.grad(a);
        const auto x = tp.value(a).data();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * detail::gelu_grad(x[i]);
    });
}

inline Var silu(Tape& t, Var a) {
    DenseTensor out = t.value(a);
    for (double& v : out.data()) v = v * detail::sigmoid(v);
    return t.push_op(std::move(out), {a}, [a](Tape& tp, const DenseTensor& g) {
        auto ga = tp.grad(a);
        const auto x = tp.value(a).data();
        for (std::size_t i = 0; i < ga.size(); ++i) {
            const double s = detail::sigmoid(x[i]);
            ga[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
        }
    });
}

// ---- normalization and softmax (row-wise over the last axis) ---------------

inline Var softmax_rows(Tape& t, Var a) {
    const DenseTensor& av = t.value(a);
    const std::size_t n = detail::cols_of(av), rows = detail::rows_of(av);
    DenseTensor out(av.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = av.data().data() + r * n;
        double* y = out.data().data() + r * n;
        double mx = x[0];
        for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, x[c]);
        double s = 0.0;
        for (std::size_t c = 0; c < n; ++c) s += (y[c] = std::exp(x[c] - mx));
        for (std::size_t c = 0; c < n; ++c) y[c] /= s;
    }
    const Var self{t.size()};
    return t.push_op(std::move(out), {a}, [a, self, rows, n](Tape& tp, const DenseTensor& g) {
        // s * (g - <g, s>)
        const auto s = tp.value(self).data();
        auto ga = tp.grad(a);
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * s[r * n + c];
            for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += s[r * n + c] * (g[r * n + c] - dot);
        }
    });
}

inline Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-6) {
    const DenseTensor& xv = t.value(x);
    const std::size_t n = detail::cols_of(xv), rows = detail::rows_of(xv);
    if (t.value(gain).size() != n || t.value(bias).size() != n) throw ShapeError("layer_norm: gain/bias width");
    DenseTensor out(xv.shape());
    std::vector<double> xhat(xv.size()), inv_std(rows);
    const auto gv = t.value(gain).data();
    const auto bv = t.value(bias).data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.data().data() + r * n;
        double mean = 0.0;
        for (std::size_t c = 0; c < n; ++c) mean += xr[c];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) var += (xr[c] - mean) * (xr[c] - mean);
        var /= static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < n; ++c) {
            xhat[r * n + c] = (xr[c] - mean) * inv_std[r];
            out[r * n + c] = xhat[r * n + c] * gv[c] + bv[c];
        }
    }
    return t.push_op(std::move(out), {x, gain, bias},
                     [x, gain, bias, rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                         Tape& tp, const DenseTensor& g) {
                         const auto gv = tp.value(gain).data();
                         if (tp.requires_grad(x)) {
                             auto gx = tp.grad(x);
                             const double inv_n = 1.0 / static_cast<double>(n);
                             for (std::size_t r = 0; r < rows; ++r) {
                                 double m1 = 0.0, m2 = 0.0;
                                 for (std::size_t c = 0; c < n; ++c) {
                                     const double dxh = g[r * n + c] * gv[c];
                                     m1 += dxh;
                                     m2 += dxh * xhat[r * n + c];
                                 }
                                 m1 *= inv_n;
                                 m2 *= inv_n;
                                 for (std::size_t c = 0; c < n; ++c) {
                                     const double dxh = g[r * n + c] * gv[c];
                                     gx[r * n + c] += inv_std[r] * (dxh - m1 - xhat[r * n + c] * m2);
                                 }
                             }
                         }
                         if (tp.requires_grad(gain)) {
                             auto gg = tp.grad(gain);
                             for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t c = 0; c < n; ++c) gg[c] += g[r * n + c] * xhat[r * n + c];
                         }
                         if (tp.requires_grad(bias)) {
                             auto gb = tp.grad(bias);
                             for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
                         }
                     });
}

inline Var rms_norm(Tape& t, Var x, Var gain, double eps = 1e-6) {
    const DenseTensor& xv = t.value(x);
    const std::size_t n = detail::cols_of(xv), rows = detail::rows_of(xv);
    if (t.value(gain).size() != n) throw ShapeError("rms_norm: gain width");
    DenseTensor out(xv.shape());
    std::vector<double> xhat(xv.size()), inv_rms(rows);
    const auto gv = t.value(gain).data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.data().data() + r * n;
        double ms = 0.0;
        for (std::size_t c = 0; c < n; ++c) ms += xr[c] * xr[c];
        inv_rms[r] = 1.0 / std::sqrt(ms / static_cast<double>(n) + eps);
        for (std::size_t c = 0; c < n; ++c) {
            xhat[r * n + c] = xr[c] * inv_rms[r];
            out[r * n + c] = xhat[r * n + c] * gv[c];
        }
    }
    return t.push_op(std::move(out), {x, gain},
                     [x, gain, rows, n, xhat = std::move(xhat), inv_rms = std::move(inv_rms)](Tape& tp,
                                                                                            const DenseTensor& g) {
                         const auto gv = tp.value(gain).data();
                         if (tp.requires_grad(x)) {
                             auto gx = tp.grad(x);
                             for (std::size_t r = 0; r < rows; ++r) {
                                 double m2 = 0.0;
                                 for (std::size_t c = 0; c < n; ++c) m2 += g[r * n + c] * gv[c] * xhat[r * n + c];
                                 m2 /= static_cast<double>(n);
                                 for (std::size_t c = 0; c < n; ++c)
                                     gx[r * n + c] += inv_rms[r] * (g[r * n + c] * gv[c] - xhat[r * n + c] * m2);
                             }
                         }
                         if (tp.requires_grad(gain)) {
                             auto gg = tp.grad(gain);
                             for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t c = 0; c < n; ++c) gg[c] += g[r * n + c] * xhat[r * n + c];
                         }
                     });
}

// ---- attention ------------------------------------------------------------

// Softmax(Q K^T / sqrt(d)) for every sequence and head, laid out as
// [group][head][query][key]. q and k are (groups*n x D) with D = heads*d.
inline std::vector<double> attention_probabilities(const DenseTensor& q, const DenseTensor& k, std::size_t groups,
                                                   std::size_t heads) {
    detail::require_matrix(q, "attention");
    detail::require_same_shape(q, k, "attention");
    const std::size_t total = q.extent(0), width = q.extent(1);
    if (groups == 0 || total % groups != 0) throw ShapeError("attention: rows not divisible by group count");
    if (heads == 0 || width % heads != 0) throw ShapeError("attention: width not divisible by head count");
    const std::size_t n = total / groups, d = width / heads;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> probs(groups * heads * n * n);
    for (std::size_t gi = 0; gi < groups; ++gi) {
        for (std::size_t h = 0; h < heads; ++h) {
            double* p = probs.data() + (gi * heads + h) * n * n;
            for (std::size_t i = 0; i < n; ++i) {
                const double* qi = q.data().data() + (gi * n + i) * width + h * d;
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < n; ++j) {
                    const double* kj = k.data().data() + (gi * n + j) * width + h * d;
                    double s = 0.0;
                    for (std::size_t c = 0; c < d; ++c) s += qi[c] * kj[c];
                    p[i * n + j] = s * inv_sqrt_d;
                    mx = std::max(mx, p[i * n + j]);
                }
                double z = 0.0;
                for (std::size_t j = 0; j < n; ++j) z += (p[i * n + j] = std::exp(p[i * n + j] - mx));
                for (std::size_t j = 0; j < n; ++j) p[i * n + j] /= z;
            }
        }
    }
    return probs;
}

// Multi-head scaled dot-product attention over `groups` independent
// sequences stacked along the rows of q, k, v (each groups*n x D):
// per sequence and head, softmax(Q K^T / sqrt(d)) V with d = D / heads.
inline Var attention(Tape& t, Var q, Var k, Var v, std::size_t groups, std::size_t heads) {
    const DenseTensor& qv = t.value(q);
    detail::require_same_shape(qv, t.value(v), "attention");
    std::vector<double> probs = attention_probabilities(qv, t.value(k), groups, heads);
    const std::size_t total = qv.extent(0), width = qv.extent(1);
    const std::size_t n = total / groups, d = width / heads;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    const auto vv = t.value(v).data();
    DenseTensor out({total, width});
    for (std::size_t gi = 0; gi < groups; ++gi)
        for (std::size_t h = 0; h < heads; ++h) {
            const double* p = probs.data() + (gi * heads + h) * n * n;
            for (std::size_t i = 0; i < n; ++i) {
                double* oi = out.data().data() + (gi * n + i) * width + h * d;
                for (std::size_t j = 0; j < n; ++j) {
                    const double* vj = vv.data() + (gi * n + j) * width + h * d;
                    for (std::size_t c = 0; c < d; ++c) oi[c] += p[i * n + j] * vj[c];
                }
            }
        }
    return t.push_op(
        std::move(out), {q, k, v},
        [q, k, v, groups, heads, n, d, width, inv_sqrt_d, probs = std::move(probs)](Tape& tp, const DenseTensor& g) {
            const auto qv = tp.value(q).data();
            const auto kv = tp.value(k).data();
            const auto vv = tp.value(v).data();
            const bool gq = tp.requires_grad(q), gk = tp.requires_grad(k), gv = tp.requires_grad(v);
            std::span<double> dq = gq ? tp.grad(q) : std::span<double>{};
            std::span<double> dk = gk ? tp.grad(k) : std::span<double>{};
            std::span<double> dv = gv ? tp.grad(v) : std::span<double>{};
            std::vector<double> dp(n);
            for (std::size_t gi = 0; gi < groups; ++gi) {
                for (std::size_t h = 0; h < heads; ++h) {
                    const double* p = probs.data() + (gi * heads + h) * n * n;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double* go = g.data().data() + (gi * n + i) * width + h * d;
                        double dot = 0.0;
                        for (std::size_t j = 0; j < n; ++j) {
                            const double* vj = vv.data() + (gi * n + j) * width + h * d;
                            double s = 0.0;
                            for (std::size_t c = 0; c < d; ++c) s += go[c] * vj[c];
                            dp[j] = s;
                            dot += s * p[i * n + j];
                            if (gv) {
                                double* dvj = dv.data() + (gi * n + j) * width + h * d;
                                for (std::size_t c = 0; c < d; ++c) dvj[c] += p[i * n + j] * go[c];
                            }
                        }
                        const double* qi = qv.data() + (gi * n + i) * width + h * d;
                        for (std::size_t j = 0; j < n; ++j) {
                            const double ds = p[i * n + j] * (dp[j] - dot) * inv_sqrt_d;
                            if (ds == 0.0) continue;
                            const double* kj = kv.data() + (gi * n + j) * width + h * d;
                            if (gq) {
                                double* dqi = dq.data() + (gi * n + i) * width + h * d;
                                for (std::size_t c = 0; c < d; ++c) dqi[c] += ds * kj[c];
                            }
                            if (gk) {
                                double* dkj = dk.data() + (gi * n + j) * width + h * d;
                                for (std::size_t c = 0; c < d; ++c) dkj[c] += ds * qi[c];
                            }
                        }
                    }
                }
            }
        });
}

// Rotary position embedding applied per head: within each head of width d,
// element c < d/2 is paired with c + d/2 and rotated by pos * base^(-2c/d).
inline Var rope(Tape& t, Var x, const std::vector<double>& positions, std::size_t heads, double base = 10000.0) {
    const DenseTensor& xv = t.value(x);
    detail::require_matrix(xv, "rope");
    const std::size_t rows = xv.extent(0), width = xv.extent(1);
    if (positions.size() != rows) throw ShapeError("rope: one position per row required");
    if (heads == 0 || width % heads != 0 || (width / heads) % 2 != 0)
        throw ShapeError("rope: head width must be even");
    const std::size_t d = width / heads, half = d / 2;
    std::vector<double> cs(rows * half), sn(rows * half);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < half; ++c) {
            const double ang =
                positions[r] * std::pow(base, -2.0 * static_cast<double>(c) / static_cast<double>(d));
            cs[r * half + c] = std::cos(ang);
            sn[r * half + c] = std::sin(ang);
        }
    DenseTensor out(xv.shape());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t c = 0; c < half; ++c) {
                const std::size_t i1 = r * width + h * d + c, i2 = i1 + half;
                const double co = cs[r * half + c], si = sn[r * half + c];
                out[i1] = xv[i1] * co - xv[i2] * si;
                out[i2] = xv[i1] * si + xv[i2] * co;
            }
    return t.push_op(std::move(out), {x},
                     [x, rows, width, heads, d, half, cs = std::move(cs), sn = std::move(sn)](Tape& tp,
                                                                                         const DenseTensor& g) {
                         auto gx = tp.grad(x);
                         for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t h = 0; h < heads; ++h)
                                 for (std::size_t c = 0; c < half; ++c) {
                                     const std::size_t i1 = r * width + h * d + c, i2 = i1 + half;
                                     const double co = cs[r * half + c], si = sn[r * half + c];
                                     gx[i1] += g[i1] * co + g[i2] * si;
                                     gx[i2] += -g[i1] * si + g[i2] * co;
                                 }
                     });
}

// ---- selection and layout -------------------------------------------------

// out row r = x row indices[r]; indices may repeat.
inline Var gather_rows(Tape& t, Var x, const std::vector<std::size_t>& indices) {
    const DenseTensor& xv = t.value(x);
    const std::size_t n = detail::cols_of(xv), rows = detail::rows_of(xv);
    if (indices.empty()) throw ShapeError("gather_rows: no indices");
    DenseTensor out({indices.size(), n});
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= rows) throw ArgumentError("gather_rows: index out of range");
        std::copy_n(xv.data().begin() + indices[r] * n, n, out.data().begin() + r * n);
    }
    return t.push_op(std::move(out), {x}, [x, indices, n](Tape& tp, const DenseTensor& g) {
        auto gx = tp.grad(x);
        for (std::size_t r = 0; r < indices.size(); ++r)
            for (std::size_t c = 0; c < n; ++c) gx[indices[r] * n + c] += g[r * n + c];
    });
}

struct RowSource {
    bool from_second = false;
    std::size_t row = 0;
};

// Interleaves rows of a and b (same width): out row r = (from_second ? b : a)[row].
inline Var merge_rows(Tape& t, Var a, Var b, const std::vector<RowSource>& sources) {
    const DenseTensor& av = t.value(a);
    const DenseTensor& bv = t.value(b);
    const std::size_t n = detail::cols_of(av);
    if (detail::cols_of(bv) != n) throw ShapeError("merge_rows: widths differ");
    if (sources.empty()) throw ShapeError("merge_rows: no rows");
    DenseTensor out({sources.size(), n});
    for (std::size_t r = 0; r < sources.size(); ++r) {
        const DenseTensor& src = sources[r].from_second ? bv : av;
        if (sources[r].row >= detail::rows_of(src)) throw ArgumentError("merge_rows: row out of range");
        std::copy_n(src.data().begin() + sources[r].row * n, n, out.data().begin() + r * n);
    }
    return t.push_op(std::move(out), {a, b}, [a, b, sources, n](Tape& tp, const DenseTensor& g) {
        const bool ga = tp.requires_grad(a), gb = tp.requires_grad(b);
        for (std::size_t r = 0; r < sources.size(); ++r) {
            const bool second = sources[r].from_second;
            if ((second && !gb) || (!second && !ga)) continue;
            auto dst = tp.grad(second ? b : a);
            for (std::size_t c = 0; c < n; ++c) dst[sources[r].row * n + c] += g[r * n + c];
        }
    });
}

// Matrix slice s of a 3-D tensor (mode-1 index s).
inline Var take_slice(Tape& t, Var w, std::size_t s) {
    const DenseTensor& wv = t.value(w);
    if (wv.rank() != 3 || s >= wv.extent(0)) throw ShapeError("take_slice: index out of range");
    const std::size_t r = wv.extent(1), c = wv.extent(2);
    DenseTensor out({r, c}, std::vector<double>(wv.data().begin() + s * r * c, wv.data().begin() + (s + 1) * r * c));
    return t.push_op(std::move(out), {w}, [w, s, r, c](Tape& tp, const DenseTensor& g) {
        auto gw = tp.grad(w);
        for (std::size_t i = 0; i < r * c; ++i) gw[s * r * c + i] += g[i];
    });
}

inline Var concat_cols(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    const std::size_t rows = t.value(parts[0]).extent(0);
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (Var p : parts) {
        detail::require_matrix(t.value(p), "concat_cols");
        if (t.value(p).extent(0) != rows) throw ShapeError("concat_cols: row counts differ");
        widths.push_back(t.value(p).extent(1));
        total += widths.back();
    }
    DenseTensor out({rows, total});
    std::size_t off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto src = t.value(parts[i]).data();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(src.begin() + r * widths[i], widths[i], out.data().begin() + r * total + off);
        off += widths[i];
    }
    return t.push_op(std::move(out), parts, [parts, widths, rows, total](Tape& tp, const DenseTensor& g) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (tp.requires_grad(parts[i])) {
                auto dst = tp.grad(parts[i]);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < widths[i]; ++c) dst[r * widths[i] + c] += g[r * total + off + c];
            }
            off += widths[i];
        }
    });
}

inline Var concat_rows(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no parts");
    const std::size_t cols = t.value(parts[0]).extent(1);
    std::vector<std::size_t> heights;
    std::size_t total = 0;
    for (Var p : parts) {
        detail::require_matrix(t.value(p), "concat_rows");
        if (t.value(p).extent(1) != cols) throw ShapeError("concat_rows: column counts differ");
        heights.push_back(t.value(p).extent(0));
        total += heights.back();
    }
    std::vector<double> data;
    data.reserve(total * cols);
    for (Var p : parts) data.insert(data.end(), t.value(p).data().begin(), t.value(p).data().end());
    return t.push_op(DenseTensor({total, cols}, std::move(data)), parts,
                     [parts, heights, cols](Tape& tp, const DenseTensor& g) {
                         std::size_t off = 0;
                         for (std::size_t i = 0; i < parts.size(); ++i) {
                             if (tp.requires_grad(parts[i])) {
                                 auto dst = tp.grad(parts[i]);
                                 for (std::size_t j = 0; j < heights[i] * cols; ++j) dst[j] += g[off + j];
                             }
                             off += heights[i] * cols;
                         }
                     });
}

// (S*m*n, p, q) -> (S, m*p, n*q); see sweet::kronecker_flatten.
inline Var kronecker_flatten(Tape& t, Var w, std::size_t m, std::size_t n) {
    const DenseTensor& wv = t.value(w);
    DenseTensor out = sweet::kronecker_flatten(wv, m, n);
    const std::size_t slices = out.extent(0), p = wv.extent(1), q = wv.extent(2);
    return t.push_op(std::move(out), {w}, [w, m, n, slices, p, q](Tape& tp, const DenseTensor& g) {
        auto gw = tp.grad(w);
        const std::size_t rows = m * p, cols = n * q;
        for (std::size_t s = 0; s < slices; ++s)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t k = 0; k < p; ++k)
                        for (std::size_t l = 0; l < q; ++l)
                            gw[(((s * m + i) * n + j) * p + k) * q + l] +=
                                g[(s * rows + i * p + k) * cols + j * q + l];
    });
}

// ---- loss -----------------------------------------------------------------

// Sum over selected rows of ||pred_r - target_r||^2, divided by the number
// of selected rows. Unselected rows contribute exactly zero.
inline Var masked_squared_error(Tape& t, Var pred, const DenseTensor& target, const std::vector<bool>& selected) {
    const DenseTensor& pv = t.value(pred);
    detail::require_same_shape(pv, target, "masked_squared_error");
    const std::size_t n = detail::cols_of(pv), rows = detail::rows_of(pv);
    if (selected.size() != rows) throw ShapeError("masked_squared_error: one flag per row required");
    std::size_t count = 0;
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (!selected[r]) continue;
        ++count;
        for (std::size_t c = 0; c < n; ++c) {
            const double e = pv[r * n + c] - target[r * n + c];
            total += e * e;
        }
    }
    if (count == 0) throw NumericError("masked_squared_error: no selected rows");
    const double inv = 1.0 / static_cast<double>(count);
    return t.push_op(DenseTensor({1}, std::vector<double>{total * inv}), {pred},
                     [pred, target, selected, n, inv](Tape& tp, const DenseTensor& g) {
                         auto gp = tp.grad(pred);
                         const auto pv = tp.value(pred).data();
                         for (std::size_t r = 0; r < selected.size(); ++r) {
                             if (!selected[r]) continue;
                             for (std::size_t c = 0; c < n; ++c)
                                 gp[r * n + c] += 2.0 * inv * g[0] * (pv[r * n + c] - target[r * n + c]);
                         }
                     });
}

}  // namespace ad

// ---- finite-difference gradient check --------------------------------------

// f(params, grads) returns the objective; when `grads` is non-null it also
// fills the analytic gradient for every entry of `params`.
using Objective = std::function<double(const ParamMap&, ParamMap*)>;

struct GradCheckOptions {
    double eps = 1e-5;
    // Coordinates whose analytic gradient magnitude is at or below this are skipped.
    double min_abs_grad = 0.0;
    // 0 checks every coordinate; otherwise a seeded sample per parameter.
    std::size_t max_coords_per_param = 0;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Largest |analytic - central difference| / max(1e-8, |analytic|).
inline GradCheckResult grad_check(const Objective& f, ParamMap params, const GradCheckOptions& opt = {}) {
    if (!(opt.eps > 0.0) || opt.eps > 1e-2) throw ArgumentError("grad_check: eps must lie in (0, 1e-2]");
    ParamMap analytic;
    const double f0 = f(params, &analytic);
    if (!std::isfinite(f0)) throw NumericError("grad_check: objective is not finite");
    Rng rng = make_rng(opt.seed, 0x9c);
    GradCheckResult res;
    for (auto& [name, tensor] : params) {
        const auto it = analytic.find(name);
        if (it == analytic.end()) throw ArgumentError("grad_check: no analytic gradient for " + name);
        std::vector<std::size_t> coords(tensor.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (opt.max_coords_per_param && coords.size() > opt.max_coords_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opt.max_coords_per_param);
            std::sort(coords.begin(), coords.end());
        }
        for (std::size_t idx : coords) {
            const double a = it->second[idx];
            if (std::abs(a) <= opt.min_abs_grad) continue;
            const double saved = tensor[idx];
            tensor[idx] = saved + opt.eps;
            const double fp = f(params, nullptr);
            tensor[idx] = saved - opt.eps;
            const double fm = f(params, nullptr);
            tensor[idx] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw NumericError("grad_check: objective is not finite near " + name);
            const double num = (fp - fm) / (2.0 * opt.eps);
            const double rel = std::abs(a - num) / std::max(1e-8, std::abs(a));
            ++res.coords_checked;
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_param = name;
                res.worst_index = idx;
                res.worst_analytic = a;
                res.worst_numeric = num;
            }
        }
    }
    return res;
}

}  // namespace sweet
