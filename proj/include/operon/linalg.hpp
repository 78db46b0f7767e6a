// Dense row-major matrix plus the small set of kernels the library needs:
// batched affine maps for network evaluation, Cholesky factorization, and a
// Jacobi eigensolver for the symmetric problems arising in modal analysis
// and frequency-domain decomposition. Problem sizes are small (tens of DoFs,
// network widths in the hundreds), so a dependency-free implementation is
// adequate and keeps results bit-reproducible.
#pragma once

#include "operon/common.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace operon {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }
    std::span<double> row_span(std::size_t r) { return {row(r), cols_}; }
    std::span<const double> row_span(std::size_t r) const { return {row(r), cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void resize(std::size_t rows, std::size_t cols) {
        rows_ = rows;
        cols_ = cols;
        data_.assign(rows * cols, 0.0);
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Dot product with eight explicit accumulator lanes. The fixed summation
// order is part of the determinism contract and also lets the reduction
// vectorize without reassociation.
inline double dot(const double* a, const double* b, std::size_t k) {
    double lanes[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 8 <= k; i += 8)
        for (std::size_t l = 0; l < 8; ++l) lanes[l] += a[i + l] * b[i + l];
    double tail = 0.0;
    for (; i < k; ++i) tail += a[i] * b[i];
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
           ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7])) + tail;
}

// out = x * w^T  (x: m-by-k, w: n-by-k, out: m-by-n). Rows of both operands
// are contiguous, so the inner dot product vectorizes.
inline void matmul_nt(const Matrix& x, const Matrix& w, Matrix& out) {
    const std::size_t m = x.rows(), k = x.cols(), n = w.rows();
    out.resize(m, n);
    for (std::size_t r = 0; r < m; ++r) {
        const double* xr = x.row(r);
        double* or_ = out.row(r);
        for (std::size_t c = 0; c < n; ++c) or_[c] = dot(xr, w.row(c), k);
    }
}

// out = d * w  (d: m-by-n, w: n-by-k, out: m-by-k), accumulated row-wise.
inline void matmul_nn(const Matrix& d, const Matrix& w, Matrix& out) {
    const std::size_t m = d.rows(), n = d.cols(), k = w.cols();
    out.resize(m, k);
    for (std::size_t r = 0; r < m; ++r) {
        const double* dr = d.row(r);
        double* or_ = out.row(r);
        for (std::size_t o = 0; o < n; ++o) {
            const double f = dr[o];
            const double* wo = w.row(o);
            for (std::size_t i = 0; i < k; ++i) or_[i] += f * wo[i];
        }
    }
}

// acc += d^T * x  (d: m-by-n, x: m-by-k, acc: n-by-k row-major buffer).
// Gradient accumulation.
inline void matmul_tn_acc(const Matrix& d, const Matrix& x, double* acc) {
    const std::size_t m = d.rows(), n = d.cols(), k = x.cols();
    for (std::size_t r = 0; r < m; ++r) {
        const double* dr = d.row(r);
        const double* xr = x.row(r);
        for (std::size_t o = 0; o < n; ++o) {
            const double f = dr[o];
            double* ao = acc + o * k;
            for (std::size_t i = 0; i < k; ++i) ao[i] += f * xr[i];
        }
    }
}

inline void matmul_tn_acc(const Matrix& d, const Matrix& x, Matrix& acc) {
    matmul_tn_acc(d, x, acc.data().data());
}

inline std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) y[r] = dot(a.row(r), x.data(), a.cols());
    return y;
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
/// Throws NumericalError if a pivot is not strictly positive.
Matrix cholesky_factor(const Matrix& a);

/// Solves L L^T x = b in place given the lower factor.
void cholesky_solve(const Matrix& lower, std::span<double> x);

struct SymmetricEigen {
    std::vector<double> values;  // ascending
    Matrix vectors;              // column j pairs with values[j]
};

/// Cyclic Jacobi for dense symmetric matrices.
SymmetricEigen symmetric_eigen(Matrix a);

/// Generalized problem K v = lambda M v with symmetric positive definite M,
/// reduced to standard form through the Cholesky factor of M. Eigenvectors
/// are returned M-normalized (v^T M v = 1).
SymmetricEigen generalized_eigen(const Matrix& k, const Matrix& m);

}  // namespace operon
