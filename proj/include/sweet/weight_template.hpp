#pragma once

// The weight template: a Tucker core shared by every model size, the
// per-size scalers (X, U, V), and the layout that maps the unified weight
// tensor (S*L slices of D x D) onto per-layer transformer matrices.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sweet/errors.hpp"
#include "sweet/rng.hpp"
#include "sweet/tensor.hpp"

namespace sweet {

enum class Role { wq, wk, wv, wo, win, wgate, wout };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::wq: return "Wq";
        case Role::wk: return "Wk";
        case Role::wv: return "Wv";
        case Role::wo: return "Wo";
        case Role::win: return "Win";
        case Role::wgate: return "Wgate";
        case Role::wout: return "Wout";
    }
    return "?";
}

struct SliceEntry {
    std::size_t layer = 0;
    Role role = Role::wq;
    std::size_t block = 0;
    friend bool operator==(const SliceEntry&, const SliceEntry&) = default;
};

// Per layer: Wq, Wk, Wv, Wo, then the MLP input projection split column-wise
// into D'/D blocks, the gate projection (SwiGLU only) split the same way, and
// the output projection split row-wise.
class LayoutDescriptor {
public:
    LayoutDescriptor() = default;
    LayoutDescriptor(std::size_t layers, std::size_t width, std::size_t mlp_blocks = 4, bool gated = false)
        : layers_(layers), width_(width), mlp_blocks_(mlp_blocks), gated_(gated) {
        if (width == 0 || mlp_blocks == 0) throw LayoutError("layout: width and MLP block count must be positive");
    }

    [[nodiscard]] std::size_t layers() const noexcept { return layers_; }
    [[nodiscard]] std::size_t width() const noexcept { return width_; }
    [[nodiscard]] std::size_t mlp_blocks() const noexcept { return mlp_blocks_; }
    [[nodiscard]] std::size_t hidden() const noexcept { return mlp_blocks_ * width_; }
    [[nodiscard]] bool gated() const noexcept { return gated_; }
    [[nodiscard]] std::size_t slices_per_layer() const noexcept { return 4 + mlp_blocks_ * (gated_ ? 3 : 2); }
    [[nodiscard]] std::size_t slice_count() const noexcept { return slices_per_layer() * layers_; }

    [[nodiscard]] std::size_t slice_index(std::size_t layer, Role role, std::size_t block = 0) const {
        std::size_t off = 0;
        switch (role) {
            case Role::wq: off = 0; break;
            case Role::wk: off = 1; break;
            case Role::wv: off = 2; break;
            case Role::wo: off = 3; break;
            case Role::win: off = 4 + block; break;
            case Role::wgate:
                if (!gated_) throw LayoutError("layout has no gate projection");
                off = 4 + mlp_blocks_ + block;
                break;
            case Role::wout: off = 4 + mlp_blocks_ * (gated_ ? 2 : 1) + block; break;
        }
        return layer * slices_per_layer() + off;
    }

    [[nodiscard]] std::vector<SliceEntry> slice_table() const {
        std::vector<SliceEntry> table;
        table.reserve(slice_count());
        for (std::size_t l = 0; l < layers_; ++l) {
            for (Role r : {Role::wq, Role::wk, Role::wv, Role::wo}) table.push_back({l, r, 0});
            for (std::size_t b = 0; b < mlp_blocks_; ++b) table.push_back({l, Role::win, b});
            if (gated_)
                for (std::size_t b = 0; b < mlp_blocks_; ++b) table.push_back({l, Role::wgate, b});
            for (std::size_t b = 0; b < mlp_blocks_; ++b) table.push_back({l, Role::wout, b});
        }
        return table;
    }

    [[nodiscard]] LayoutDescriptor resized(std::size_t layers, std::size_t width) const {
        return LayoutDescriptor(layers, width, mlp_blocks_, gated_);
    }

    friend bool operator==(const LayoutDescriptor&, const LayoutDescriptor&) = default;

private:
    std::size_t layers_ = 0;
    std::size_t width_ = 0;
    std::size_t mlp_blocks_ = 4;
    bool gated_ = false;
};

// Realized weights of one transformer layer (x W convention: rows index inputs).
struct LayerWeights {
    DenseMatrix wq, wk, wv, wo;  // D x D
    DenseMatrix win;             // D x D'
    DenseMatrix wgate;           // D x D' (gated MLP only)
    DenseMatrix wout;            // D' x D
    friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

struct UnifiedWeightTensor {
    DenseTensor w;  // (S*L, D, D)
    LayoutDescriptor layout;
};

namespace detail {

inline void check_block(const DenseMatrix& m, std::size_t rows, std::size_t cols, Role role, std::size_t layer) {
    if (m.rows() != rows || m.cols() != cols)
        throw LayoutError(std::string(role_name(role)) + " of layer " + std::to_string(layer) + " is " +
                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                          std::to_string(rows) + "x" + std::to_string(cols));
}

inline void put_block(DenseTensor& w, std::size_t slice, const DenseMatrix& m, std::size_t r0, std::size_t c0,
                      std::size_t d) {
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) w(slice, r, c) = m(r0 + r, c0 + c);
}

inline void get_block(const DenseTensor& w, std::size_t slice, DenseMatrix& m, std::size_t r0, std::size_t c0,
                      std::size_t d) {
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) m(r0 + r, c0 + c) = w(slice, r, c);
}

}  // namespace detail

inline UnifiedWeightTensor concat_weights(const std::vector<LayerWeights>& theta, const LayoutDescriptor& layout) {
    const std::size_t d = layout.width(), hid = layout.hidden(), nb = layout.mlp_blocks();
    if (theta.size() != layout.layers())
        throw LayoutError("expected " + std::to_string(layout.layers()) + " layers, got " +
                          std::to_string(theta.size()));
    DenseTensor w({layout.slice_count(), d, d});
    for (std::size_t l = 0; l < theta.size(); ++l) {
        const LayerWeights& lw = theta[l];
        const std::pair<Role, const DenseMatrix*> square[] = {
            {Role::wq, &lw.wq}, {Role::wk, &lw.wk}, {Role::wv, &lw.wv}, {Role::wo, &lw.wo}};
        for (const auto& [role, m] : square) {
            detail::check_block(*m, d, d, role, l);
            detail::put_block(w, layout.slice_index(l, role), *m, 0, 0, d);
        }
        detail::check_block(lw.win, d, hid, Role::win, l);
        detail::check_block(lw.wout, hid, d, Role::wout, l);
        if (layout.gated()) detail::check_block(lw.wgate, d, hid, Role::wgate, l);
        for (std::size_t b = 0; b < nb; ++b) {
            detail::put_block(w, layout.slice_index(l, Role::win, b), lw.win, 0, b * d, d);
            if (layout.gated()) detail::put_block(w, layout.slice_index(l, Role::wgate, b), lw.wgate, 0, b * d, d);
            detail::put_block(w, layout.slice_index(l, Role::wout, b), lw.wout, b * d, 0, d);
        }
    }
    return {std::move(w), layout};
}

inline std::vector<LayerWeights> split_weights(const UnifiedWeightTensor& unified) {
    const LayoutDescriptor& layout = unified.layout;
    const std::size_t d = layout.width(), hid = layout.hidden(), nb = layout.mlp_blocks();
    const DenseTensor& w = unified.w;
    if (w.rank() != 3 || w.extent(0) != layout.slice_count() || w.extent(1) != d || w.extent(2) != d)
        throw LayoutError("unified tensor " + shape_string(w.shape()) + " does not match layout (" +
                          std::to_string(layout.slice_count()) + "," + std::to_string(d) + "," +
                          std::to_string(d) + ")");
    std::vector<LayerWeights> theta(layout.layers());
    for (std::size_t l = 0; l < layout.layers(); ++l) {
        LayerWeights& lw = theta[l];
        lw.wq = DenseMatrix(d, d);
        lw.wk = DenseMatrix(d, d);
        lw.wv = DenseMatrix(d, d);
        lw.wo = DenseMatrix(d, d);
        detail::get_block(w, layout.slice_index(l, Role::wq), lw.wq, 0, 0, d);
        detail::get_block(w, layout.slice_index(l, Role::wk), lw.wk, 0, 0, d);
        detail::get_block(w, layout.slice_index(l, Role::wv), lw.wv, 0, 0, d);
        detail::get_block(w, layout.slice_index(l, Role::wo), lw.wo, 0, 0, d);
        lw.win = DenseMatrix(d, hid);
        lw.wout = DenseMatrix(hid, d);
        if (layout.gated()) lw.wgate = DenseMatrix(d, hid);
        for (std::size_t b = 0; b < nb; ++b) {
            detail::get_block(w, layout.slice_index(l, Role::win, b), lw.win, 0, b * d, d);
            if (layout.gated()) detail::get_block(w, layout.slice_index(l, Role::wgate, b), lw.wgate, 0, b * d, d);
            detail::get_block(w, layout.slice_index(l, Role::wout, b), lw.wout, b * d, 0, d);
        }
    }
    return theta;
}

struct Template {
    DenseTensor core;  // (r1, r2, r3)
    [[nodiscard]] std::array<std::size_t, 3> ranks() const { return {core.extent(0), core.extent(1), core.extent(2)}; }
};

struct Scalers {
    DenseMatrix x;  // (S*L, r1)
    DenseMatrix u;  // (D, r2)
    DenseMatrix v;  // (D, r3)
    friend bool operator==(const Scalers&, const Scalers&) = default;
};

inline void check_template_shapes(const Template& tmpl, const Scalers& s, const LayoutDescriptor& layout) {
    if (tmpl.core.rank() != 3) throw ShapeError("template core must be 3-D");
    const auto [r1, r2, r3] = tmpl.ranks();
    if (s.x.cols() != r1 || s.u.cols() != r2 || s.v.cols() != r3)
        throw ShapeError("scaler column counts (" + std::to_string(s.x.cols()) + "," + std::to_string(s.u.cols()) +
                         "," + std::to_string(s.v.cols()) + ") do not match template ranks " +
                         shape_string(tmpl.core.shape()));
    if (s.x.rows() != layout.slice_count() || s.u.rows() != layout.width() || s.v.rows() != layout.width())
        throw ShapeError("scaler row counts (" + std::to_string(s.x.rows()) + "," + std::to_string(s.u.rows()) + "," +
                         std::to_string(s.v.rows()) + ") do not match layout (" +
                         std::to_string(layout.slice_count()) + "," + std::to_string(layout.width()) + "," +
                         std::to_string(layout.width()) + ")");
}

// W = G x1 X x2 U x3 V
inline UnifiedWeightTensor reconstruct(const Template& tmpl, const Scalers& s, const LayoutDescriptor& layout) {
    check_template_shapes(tmpl, s, layout);
    return {tucker_reconstruct(tmpl.core, s.x, s.u, s.v), layout};
}

// Prefix width mask: rows below keep_u (keep_v) of U (V) survive.
struct WidthMask {
    std::size_t keep_u = 0;
    std::size_t keep_v = 0;

    [[nodiscard]] static DenseMatrix prefix_mask(std::size_t rows, std::size_t cols, std::size_t keep) {
        DenseMatrix m(rows, cols);
        for (std::size_t r = 0; r < std::min(keep, rows); ++r)
            for (std::size_t c = 0; c < cols; ++c) m(r, c) = 1.0;
        return m;
    }
    [[nodiscard]] DenseMatrix mask_u(std::size_t width, std::size_t r2) const { return prefix_mask(width, r2, keep_u); }
    [[nodiscard]] DenseMatrix mask_v(std::size_t width, std::size_t r3) const { return prefix_mask(width, r3, keep_v); }
    [[nodiscard]] bool is_full(std::size_t width) const noexcept { return keep_u >= width && keep_v >= width; }
    friend bool operator==(const WidthMask&, const WidthMask&) = default;
};

inline void check_width_mask(const WidthMask& mask, std::size_t width) {
    if (mask.keep_u < 1 || mask.keep_u > width || mask.keep_v < 1 || mask.keep_v > width)
        throw ArgumentError("width mask keep values (" + std::to_string(mask.keep_u) + "," +
                            std::to_string(mask.keep_v) + ") must lie in [1, " + std::to_string(width) + "]");
}

// U~ = M_U (.) U, V~ = M_V (.) V; X is untouched. Masked rows are set to exact zeros.
inline Scalers apply_width_mask(const Scalers& s, const WidthMask& mask) {
    if (s.u.rows() != s.v.rows()) throw ShapeError("apply_width_mask: U and V row counts differ");
    check_width_mask(mask, s.u.rows());
    Scalers out = s;
    const DenseMatrix mu = mask.mask_u(s.u.rows(), s.u.cols());
    const DenseMatrix mv = mask.mask_v(s.v.rows(), s.v.cols());
    for (std::size_t i = 0; i < out.u.size(); ++i) out.u.storage()[i] *= mu.storage()[i];
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v.storage()[i] *= mv.storage()[i];
    return out;
}

// Distribution over kept widths used for width-wise stochastic scaling.
struct WidthDistribution {
    std::vector<std::size_t> widths;
    std::vector<double> probs;

    static WidthDistribution uniform(std::vector<std::size_t> widths) {
        std::vector<double> p(widths.size(), widths.empty() ? 0.0 : 1.0 / static_cast<double>(widths.size()));
        return {std::move(widths), std::move(p)};
    }
    static WidthDistribution full(std::size_t width) { return {{width}, {1.0}}; }

    void validate(std::size_t width) const {
        if (widths.empty()) throw ArgumentError("width distribution: no widths");
        if (probs.size() != widths.size()) throw ArgumentError("width distribution: one probability per width");
        double total = 0.0;
        for (std::size_t i = 0; i < widths.size(); ++i) {
            if (widths[i] < 1 || widths[i] > width)
                throw ArgumentError("width distribution: width " + std::to_string(widths[i]) + " outside [1, " +
                                    std::to_string(width) + "]");
            if (probs[i] < 0.0) throw ArgumentError("width distribution: negative probability");
            total += probs[i];
        }
        if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("width distribution: probabilities must sum to 1");
    }

    [[nodiscard]] bool degenerate_full(std::size_t width) const {
        for (std::size_t i = 0; i < widths.size(); ++i)
            if (probs[i] > 0.0 && widths[i] != width) return false;
        return true;
    }
};

namespace detail {

inline std::size_t draw_width(Rng& rng, const WidthDistribution& dist) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.widths.size(); ++i) {
        acc += dist.probs[i];
        if (x < acc) return dist.widths[i];
    }
    // Rounding left x above the final cumulative sum: take the last width with mass.
    for (std::size_t i = dist.widths.size(); i-- > 0;)
        if (dist.probs[i] > 0.0) return dist.widths[i];
    return dist.widths.back();
}

}  // namespace detail

// keep_u and keep_v are drawn independently from the same distribution.
inline WidthMask sample_width_config(Rng& rng, const WidthDistribution& dist, std::size_t width) {
    dist.validate(width);
    WidthMask m;
    m.keep_u = detail::draw_width(rng, dist);
    m.keep_v = detail::draw_width(rng, dist);
    return m;
}

enum class DepthStrategy { first_layers, even_stride };

// Source layer indices kept for a depth-reduced target.
inline std::vector<std::size_t> select_layers(std::size_t source_layers, std::size_t target_layers,
                                              DepthStrategy strategy) {
    if (target_layers > source_layers) throw CapabilityError("target depth exceeds source depth");
    std::vector<std::size_t> out(target_layers);
    for (std::size_t i = 0; i < target_layers; ++i)
        out[i] = strategy == DepthStrategy::first_layers ? i : (i * source_layers) / target_layers;
    return out;
}

// Inherited scalers for a smaller target: first D* rows of U and V, and the
// X rows of the selected layers. Bit-exact copies, no arithmetic.
inline Scalers slice_scalers(const Scalers& s, const LayoutDescriptor& src, std::size_t target_layers,
                             std::size_t target_width, DepthStrategy strategy = DepthStrategy::first_layers) {
    if (target_width > src.width() || target_layers > src.layers())
        throw CapabilityError("target (L=" + std::to_string(target_layers) + ", D=" + std::to_string(target_width) +
                              ") exceeds source (L=" + std::to_string(src.layers()) + ", D=" +
                              std::to_string(src.width()) + "); use random initialization instead");
    if (target_width == 0 || target_layers == 0) throw ArgumentError("target extents must be positive");
    const std::size_t per = src.slices_per_layer(), r1 = s.x.cols();
    const auto layers = select_layers(src.layers(), target_layers, strategy);
    DenseMatrix x(per * target_layers, r1);
    for (std::size_t i = 0; i < layers.size(); ++i)
        std::copy_n(s.x.storage().begin() + layers[i] * per * r1, per * r1, x.storage().begin() + i * per * r1);
    return {std::move(x), s.u.top_rows(target_width), s.v.top_rows(target_width)};
}

inline double population_std(std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(x.size()));
}

// Fresh normal scalers for `target`, globally rescaled so the reconstructed
// weights have standard deviation target_std. Each factor is scaled by the
// cube root of the correction since W is trilinear in (X, U, V).
inline Scalers random_scalers(Rng& rng, const LayoutDescriptor& target, const Template& tmpl, double target_std) {
    if (!(target_std > 0.0)) throw ArgumentError("random_scalers: target_std must be positive");
    const auto [r1, r2, r3] = tmpl.ranks();
    Scalers s{DenseMatrix(target.slice_count(), r1), DenseMatrix(target.width(), r2), DenseMatrix(target.width(), r3)};
    fill_normal(s.x.data(), rng);
    fill_normal(s.u.data(), rng);
    fill_normal(s.v.data(), rng);
    const double measured = population_std(reconstruct(tmpl, s, target).w.data());
    if (!(measured > 0.0) || !std::isfinite(measured))
        throw CalibrationError("random_scalers: reconstructed weights are degenerate (is the template all zero?)");
    const double f = std::cbrt(target_std / measured);
    for (DenseMatrix* m : {&s.x, &s.u, &s.v})
        for (double& v : m->data()) v *= f;
    return s;
}

inline std::size_t template_param_count(const Template& t) { return t.core.size(); }
inline std::size_t scaler_param_count(const Scalers& s) { return s.x.size() + s.u.size() + s.v.size(); }

// r1*r2*r3 + S*L*r1 + D*(r2 + r3) < S*L*D^2
inline bool bottleneck_holds(const LayoutDescriptor& layout, std::array<std::size_t, 3> ranks) {
    const std::size_t factored = ranks[0] * ranks[1] * ranks[2] + layout.slice_count() * ranks[0] +
                                 layout.width() * (ranks[1] + ranks[2]);
    return factored < layout.slice_count() * layout.width() * layout.width();
}

inline void check_ranks(const LayoutDescriptor& layout, std::array<std::size_t, 3> ranks) {
    if (ranks[0] < 1 || ranks[1] < 1 || ranks[2] < 1) throw ArgumentError("template ranks must be positive");
    if (ranks[0] > layout.slice_count() || ranks[1] > layout.width() || ranks[2] > layout.width())
        throw ArgumentError("template ranks (" + std::to_string(ranks[0]) + "," + std::to_string(ranks[1]) + "," +
                            std::to_string(ranks[2]) + ") exceed (S*L, D, D) = (" +
                            std::to_string(layout.slice_count()) + "," + std::to_string(layout.width()) + "," +
                            std::to_string(layout.width()) + ")");
}

}  // namespace sweet
