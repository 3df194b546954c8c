#pragma once

// Dense row-major tensors and matrices (last index fastest) plus the
// multilinear algebra used by the weight template: mode-n unfolding,
// mode-n products, Tucker reconstruction and Kronecker products.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sweet/errors.hpp"

namespace sweet {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

inline std::size_t shape_product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

class DenseMatrix;

class DenseTensor {
public:
    DenseTensor() = default;

    explicit DenseTensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
        check_extents();
    }

    DenseTensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_extents();
        if (shape_product(shape_) != data_.size())
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_string(shape_));
    }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::vector<double>& storage() noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& storage() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    // Same data, new shape with the same element count.
    [[nodiscard]] DenseTensor reshaped(Shape shape) const& { return DenseTensor(std::move(shape), data_); }
    [[nodiscard]] DenseTensor reshaped(Shape shape) && { return DenseTensor(std::move(shape), std::move(data_)); }

    friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

private:
    void check_extents() const {
        for (auto e : shape_)
            if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape_));
    }

    Shape shape_;
    std::vector<double> data_;
};

class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0) throw ShapeError("matrix extents must be positive");
    }

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows == 0 || cols == 0) throw ShapeError("matrix extents must be positive");
        if (data_.size() != rows * cols)
            throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    }

    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows.size() ? rows.begin()->size() : 0;
        if (rows_ == 0 || cols_ == 0) throw ShapeError("matrix extents must be positive");
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw ShapeError("ragged matrix literal");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::vector<double>& storage() noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& storage() const noexcept { return data_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    [[nodiscard]] DenseMatrix transpose() const {
        DenseMatrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    // Rows [begin, begin+count) and columns [0, cols) as a copy.
    [[nodiscard]] DenseMatrix top_rows(std::size_t count) const {
        if (count == 0 || count > rows_) throw ShapeError("top_rows: count out of range");
        return DenseMatrix(count, cols_, std::vector<double>(data_.begin(), data_.begin() + count * cols_));
    }

    [[nodiscard]] DenseMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
        if (r0 + nr > rows_ || c0 + nc > cols_) throw ShapeError("block out of range");
        DenseMatrix b(nr, nc);
        for (std::size_t r = 0; r < nr; ++r)
            std::copy_n(data_.begin() + (r0 + r) * cols_ + c0, nc, b.data_.begin() + r * nc);
        return b;
    }

    [[nodiscard]] DenseTensor to_tensor() const& { return DenseTensor({rows_, cols_}, data_); }
    [[nodiscard]] DenseTensor to_tensor() && { return DenseTensor({rows_, cols_}, std::move(data_)); }

    static DenseMatrix from_tensor(const DenseTensor& t) {
        if (t.rank() != 2) throw ShapeError("expected a rank-2 tensor, got " + shape_string(t.shape()));
        return DenseMatrix(t.extent(0), t.extent(1), t.storage());
    }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace kernels {

// C (m x n) += A (m x k) * B (k x n)
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C (m x n) += A^T * B, with A stored (k x m) and B (k x n)
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C (m x n) += A * B^T, with A stored (m x k) and B (n x k)
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] += s;
        }
    }
}

}  // namespace kernels

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner extents differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + ")");
    DenseMatrix c(a.rows(), b.cols());
    kernels::gemm_nn(a.rows(), b.cols(), a.cols(), a.data().data(), b.data().data(), c.data().data());
    return c;
}

inline double frobenius_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

// ||a - b||_F / ||b||_F, with the denominator floored so zero references compare absolutely.
inline double relative_frobenius_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("relative error: length mismatch");
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(diff) / std::max(frobenius_norm(b), 1e-300);
}

inline double max_abs_difference(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("max difference: length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

namespace detail {

inline void check_mode(const DenseTensor& t, int mode) {
    if (t.rank() != 3) throw ArgumentError("expected a 3-D tensor, got " + shape_string(t.shape()));
    if (mode < 1 || mode > 3) throw ArgumentError("mode must be 1, 2 or 3, got " + std::to_string(mode));
}

}  // namespace detail

// Mode-n unfolding (modes are 1-based). Row i collects every element whose
// mode-n index is i; columns enumerate the remaining indices in row-major
// order (the later remaining mode varies fastest).
inline DenseMatrix unfold(const DenseTensor& t, int mode) {
    detail::check_mode(t, mode);
    const std::size_t i1 = t.extent(0), i2 = t.extent(1), i3 = t.extent(2);
    switch (mode) {
        case 1:
            return DenseMatrix(i1, i2 * i3, t.storage());
        case 2: {
            DenseMatrix m(i2, i1 * i3);
            for (std::size_t a = 0; a < i1; ++a)
                for (std::size_t b = 0; b < i2; ++b)
                    for (std::size_t c = 0; c < i3; ++c) m(b, a * i3 + c) = t(a, b, c);
            return m;
        }
        default: {
            DenseMatrix m(i3, i1 * i2);
            for (std::size_t a = 0; a < i1; ++a)
                for (std::size_t b = 0; b < i2; ++b)
                    for (std::size_t c = 0; c < i3; ++c) m(c, a * i2 + b) = t(a, b, c);
            return m;
        }
    }
}

// Inverse of unfold: rebuilds a tensor of `shape` from its mode-n unfolding.
inline DenseTensor fold(const DenseMatrix& m, int mode, const Shape& shape) {
    if (shape.size() != 3) throw ArgumentError("fold expects a 3-D target shape");
    if (mode < 1 || mode > 3) throw ArgumentError("mode must be 1, 2 or 3, got " + std::to_string(mode));
    const std::size_t i1 = shape[0], i2 = shape[1], i3 = shape[2];
    const std::size_t lead = shape[mode - 1];
    if (m.rows() != lead || m.cols() * lead != i1 * i2 * i3)
        throw ShapeError("fold: matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                         " does not unfold shape " + shape_string(shape) + " along mode " + std::to_string(mode));
    DenseTensor t(shape);
    switch (mode) {
        case 1:
            std::copy(m.storage().begin(), m.storage().end(), t.storage().begin());
            break;
        case 2:
            for (std::size_t a = 0; a < i1; ++a)
                for (std::size_t b = 0; b < i2; ++b)
                    for (std::size_t c = 0; c < i3; ++c) t(a, b, c) = m(b, a * i3 + c);
            break;
        default:
            for (std::size_t a = 0; a < i1; ++a)
                for (std::size_t b = 0; b < i2; ++b)
                    for (std::size_t c = 0; c < i3; ++c) t(a, b, c) = m(c, a * i2 + b);
            break;
    }
    return t;
}

// T x_n M: contracts mode n of T with the columns of M, so the mode-n extent
// becomes M.rows(). Computed as fold(M * unfold(T, n)).
inline DenseTensor mode_n_product(const DenseTensor& t, const DenseMatrix& m, int mode) {
    detail::check_mode(t, mode);
    const std::size_t expected = t.extent(static_cast<std::size_t>(mode - 1));
    if (m.cols() != expected)
        throw ShapeError("mode-" + std::to_string(mode) + " product: expected matrix with " +
                         std::to_string(expected) + " columns, got " + std::to_string(m.cols()));
    Shape out_shape = t.shape();
    out_shape[static_cast<std::size_t>(mode - 1)] = m.rows();
    return fold(matmul(m, unfold(t, mode)), mode, out_shape);
}

// G x1 X x2 U x3 V
inline DenseTensor tucker_reconstruct(const DenseTensor& core, const DenseMatrix& x, const DenseMatrix& u,
                                      const DenseMatrix& v) {
    if (core.rank() != 3) throw ShapeError("Tucker core must be 3-D, got " + shape_string(core.shape()));
    if (x.cols() != core.extent(0) || u.cols() != core.extent(1) || v.cols() != core.extent(2))
        throw ShapeError("Tucker factors with column counts (" + std::to_string(x.cols()) + "," +
                         std::to_string(u.cols()) + "," + std::to_string(v.cols()) + ") do not match core " +
                         shape_string(core.shape()));
    return mode_n_product(mode_n_product(mode_n_product(core, x, 1), u, 2), v, 3);
}

// out[i*p + k, j*q + l] = a[i,j] * b[k,l]
inline DenseMatrix kronecker(const DenseMatrix& a, const DenseMatrix& b) {
    const std::size_t p = b.rows(), q = b.cols();
    DenseMatrix out(a.rows() * p, a.cols() * q);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            for (std::size_t k = 0; k < p; ++k)
                for (std::size_t l = 0; l < q; ++l) out(i * p + k, j * q + l) = a(i, j) * b(k, l);
    return out;
}

struct TuckerFactors {
    DenseTensor core;
    DenseMatrix x;
    DenseMatrix u;
    DenseMatrix v;
};

// Rearranges a tensor of shape (S*m*n, p, q) into (S, m*p, n*q) with
//   out[s, i*p + k, j*q + l] = in[(s*m + i)*n + j, k, l].
// For S = 1 this is the flattening under which a rank-one Tucker term
// vec(A) x B becomes the Kronecker product A (x) B.
inline DenseTensor kronecker_flatten(const DenseTensor& t, std::size_t m, std::size_t n) {
    if (t.rank() != 3) throw ShapeError("kronecker_flatten expects a 3-D tensor");
    if (m == 0 || n == 0 || t.extent(0) % (m * n) != 0)
        throw ShapeError("kronecker_flatten: mode-1 extent " + std::to_string(t.extent(0)) +
                         " is not a multiple of " + std::to_string(m) + "*" + std::to_string(n));
    const std::size_t slices = t.extent(0) / (m * n), p = t.extent(1), q = t.extent(2);
    DenseTensor out({slices, m * p, n * q});
    for (std::size_t s = 0; s < slices; ++s)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < p; ++k)
                    for (std::size_t l = 0; l < q; ++l) out(s, i * p + k, j * q + l) = t((s * m + i) * n + j, k, l);
    return out;
}

// Sum of Kronecker products sum_t A_t (x) B_t written as a Tucker model:
// the core stacks the B_t along mode 1, the columns of X hold vec(A_t), and
// U, V are identities. kronecker_flatten of the reconstruction gives the sum.
inline TuckerFactors kronecker_sum_as_tucker(const std::vector<std::pair<DenseMatrix, DenseMatrix>>& terms) {
    if (terms.empty()) throw ArgumentError("kronecker_sum_as_tucker: no terms");
    const std::size_t m = terms[0].first.rows(), n = terms[0].first.cols();
    const std::size_t p = terms[0].second.rows(), q = terms[0].second.cols();
    const std::size_t r = terms.size();
    DenseTensor core({r, p, q});
    DenseMatrix x(m * n, r);
    for (std::size_t t = 0; t < r; ++t) {
        const auto& [a, b] = terms[t];
        if (a.rows() != m || a.cols() != n || b.rows() != p || b.cols() != q)
            throw ShapeError("kronecker_sum_as_tucker: terms have inconsistent shapes");
        for (std::size_t k = 0; k < p; ++k)
            for (std::size_t l = 0; l < q; ++l) core(t, k, l) = b(k, l);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) x(i * n + j, t) = a(i, j);
    }
    return {std::move(core), std::move(x), DenseMatrix::identity(p), DenseMatrix::identity(q)};
}

inline TuckerFactors kronecker_as_tucker(const DenseMatrix& a, const DenseMatrix& b) {
    return kronecker_sum_as_tucker({{a, b}});
}

// Reconstructs the Tucker model returned by kronecker_as_tucker and flattens
// it back to the (m*p) x (n*q) Kronecker layout.
inline DenseMatrix kronecker_from_tucker(const TuckerFactors& f, std::size_t m, std::size_t n) {
    const DenseTensor w = kronecker_flatten(tucker_reconstruct(f.core, f.x, f.u, f.v), m, n);
    return DenseMatrix(w.extent(1), w.extent(2), w.storage());
}

}  // namespace sweet
