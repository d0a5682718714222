#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace drip {

// Dense row-major matrix of doubles. All model math is 64-bit.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) {
        assert(i < rows && j < cols);
        return data[i * cols + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        assert(i < rows && j < cols);
        return data[i * cols + j];
    }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
    std::size_t size() const { return data.size(); }
};

using Vector = std::vector<double>;

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// y = x^T W + b, with W of shape (n_in, n_out) row-major.
inline void affine_forward(const double* x, std::size_t n_in,
                           const double* W, const double* b,
                           double* y, std::size_t n_out) {
    for (std::size_t j = 0; j < n_out; ++j) y[j] = b ? b[j] : 0.0;
    for (std::size_t i = 0; i < n_in; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* wrow = W + i * n_out;
        for (std::size_t j = 0; j < n_out; ++j) y[j] += xi * wrow[j];
    }
}

// Backward of affine_forward. Accumulates into dW, db, dx (any may be null).
inline void affine_backward(const double* x, std::size_t n_in,
                            const double* W, const double* dy, std::size_t n_out,
                            double* dW, double* db, double* dx) {
    if (db) {
        for (std::size_t j = 0; j < n_out; ++j) db[j] += dy[j];
    }
    for (std::size_t i = 0; i < n_in; ++i) {
        const double* wrow = W + i * n_out;
        if (dW) {
            double* dwrow = dW + i * n_out;
            const double xi = x[i];
            for (std::size_t j = 0; j < n_out; ++j) dwrow[j] += xi * dy[j];
        }
        if (dx) dx[i] += dot(wrow, dy, n_out);
    }
}

// C (+)= op(A) * op(B). Shapes are validated by assert only; callers are
// internal and sizes are known.
inline void matmul(const Matrix& A, bool transA, const Matrix& B, bool transB,
                   Matrix& C, bool accumulate = false) {
    const std::size_t p = transA ? A.cols : A.rows;
    const std::size_t q = transA ? A.rows : A.cols;
    const std::size_t r = transB ? B.rows : B.cols;
    assert((transB ? B.cols : B.rows) == q);
    if (C.rows != p || C.cols != r) C = Matrix(p, r);
    if (!accumulate) C.fill(0.0);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < q; ++k) {
            const double a = transA ? A(k, i) : A(i, k);
            if (a == 0.0) continue;
            double* crow = C.row(i);
            if (!transB) {
                const double* brow = B.row(k);
                for (std::size_t j = 0; j < r; ++j) crow[j] += a * brow[j];
            } else {
                for (std::size_t j = 0; j < r; ++j) crow[j] += a * B(j, k);
            }
        }
    }
}

}  // namespace drip
