#pragma once

// Random patch masking and the masked reconstruction loss.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "sweet/errors.hpp"
#include "sweet/rng.hpp"
#include "sweet/tensor.hpp"

namespace sweet {

struct MaskSpec {
    std::size_t patches = 0;             // N
    double ratio = 0.75;
    std::vector<std::size_t> masked;     // sorted
    std::vector<std::size_t> visible;    // sorted complement
    bool degenerate = false;             // nothing or everything masked (N > 1)

    [[nodiscard]] std::vector<bool> masked_flags() const {
        std::vector<bool> f(patches, false);
        for (auto i : masked) f[i] = true;
        return f;
    }
};

inline std::size_t masked_count(std::size_t patches, double ratio) {
    return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(patches)));
}

inline MaskSpec make_mask(std::size_t patches, std::vector<std::size_t> masked, double ratio = 0.0) {
    if (patches == 0) throw ArgumentError("mask: patch count must be positive");
    std::sort(masked.begin(), masked.end());
    if (std::adjacent_find(masked.begin(), masked.end()) != masked.end())
        throw ArgumentError("mask: duplicate masked index");
    if (!masked.empty() && masked.back() >= patches) throw ArgumentError("mask: masked index out of range");
    MaskSpec spec;
    spec.patches = patches;
    spec.ratio = ratio;
    std::vector<bool> flag(patches, false);
    for (auto i : masked) flag[i] = true;
    for (std::size_t i = 0; i < patches; ++i)
        if (!flag[i]) spec.visible.push_back(i);
    spec.masked = std::move(masked);
    spec.degenerate = patches > 1 && (spec.masked.empty() || spec.visible.empty());
    return spec;
}

// Uniformly random subset of round(ratio * N) patch indices.
inline MaskSpec mask_patches(std::size_t patches, double ratio, Rng& rng) {
    if (patches == 0) throw ArgumentError("mask_patches: N must be at least 1");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ArgumentError("mask_patches: ratio must lie in (0, 1)");
    std::vector<std::size_t> order(patches);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(masked_count(patches, ratio));
    return make_mask(patches, std::move(order), ratio);
}

// (1/|M|) sum_{i in M} ||pred_i - target_i||^2 for one image; rows are patches.
inline double mae_loss(const DenseMatrix& pred, const DenseMatrix& target, const MaskSpec& spec) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw ShapeError("mae_loss: prediction and target shapes differ");
    if (pred.rows() != spec.patches) throw ShapeError("mae_loss: row count must equal the patch count");
    if (spec.masked.empty()) throw NumericError("mae_loss: empty mask set (division by zero)");
    double total = 0.0;
    for (auto i : spec.masked)
        for (std::size_t c = 0; c < pred.cols(); ++c) {
            const double e = pred(i, c) - target(i, c);
            total += e * e;
        }
    return total / static_cast<double>(spec.masked.size());
}

}  // namespace sweet
