#pragma once

// Dense row-major matrices and the handful of kernels the rest of the
// library is built on. Everything is double precision.
//
// Determinism note: every reduction here sums in a fixed order (ascending
// inner index), so a given kernel is reproducible bit-for-bit on a given
// build. gemm_acc and matvec_acc use different accumulation shapes, so the
// batched and single-vector paths agree only to rounding, not bitwise.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rnnlab {

using Vector = std::vector<double>;

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // row-major, rows*cols entries

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(checked_size(r, c), 0.0) {}

    double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

  private:
    static size_t checked_size(int r, int c) {
        if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
        return static_cast<size_t>(r) * static_cast<size_t>(c);
    }
};

inline void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

// C += scale * A * B
inline void gemm_acc(Matrix& c, const Matrix& a, const Matrix& b, double scale = 1.0) {
    require(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols, "gemm_acc: dimension mismatch");
    const int m = a.rows, kk = a.cols, n = b.cols;
    for (int i = 0; i < m; ++i) {
        double* ci = c.row(i);
        const double* ai = a.row(i);
        for (int k = 0; k < kk; ++k) {
            const double s = scale * ai[k];
            const double* bk = b.row(k);
            for (int j = 0; j < n; ++j) ci[j] += s * bk[j];
        }
    }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    gemm_acc(c, a, b);
    return c;
}

// y += A x, accumulating over columns in ascending order. Uses a register
// accumulator, so it matches gemm_acc on a one-column B only to rounding.
inline void matvec_acc(Vector& y, const Matrix& a, const Vector& x) {
    require(static_cast<int>(x.size()) == a.cols && static_cast<int>(y.size()) == a.rows,
            "matvec_acc: dimension mismatch");
    for (int i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double acc = y[i];
        for (int k = 0; k < a.cols; ++k) acc += ai[k] * x[k];
        y[i] = acc;
    }
}

inline Vector matvec(const Matrix& a, const Vector& x) {
    Vector y(a.rows, 0.0);
    matvec_acc(y, a, x);
    return y;
}

// C += scale * A^T * B
inline void gemm_t_acc(Matrix& c, const Matrix& a, const Matrix& b, double scale = 1.0) {
    require(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols,
            "gemm_t_acc: dimension mismatch");
    const int kk = a.rows, n = b.cols;
    for (int k = 0; k < kk; ++k) {
        const double* ak = a.row(k);
        const double* bk = b.row(k);
        for (int i = 0; i < a.cols; ++i) {
            const double s = scale * ak[i];
            double* ci = c.row(i);
            for (int j = 0; j < n; ++j) ci[j] += s * bk[j];
        }
    }
}

// C += scale * A * B^T
inline void gemm_bt_acc(Matrix& c, const Matrix& a, const Matrix& b, double scale = 1.0) {
    require(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows,
            "gemm_bt_acc: dimension mismatch");
    const int kk = a.cols;
    for (int i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* bj = b.row(j);
            double acc = 0.0;
            for (int k = 0; k < kk; ++k) acc += ai[k] * bj[k];
            ci[j] += scale * acc;
        }
    }
}

// y += A^T x
inline void matvec_t_acc(Vector& y, const Matrix& a, const Vector& x) {
    require(static_cast<int>(x.size()) == a.rows && static_cast<int>(y.size()) == a.cols,
            "matvec_t_acc: dimension mismatch");
    for (int i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        const double xi = x[i];
        for (int j = 0; j < a.cols; ++j) y[j] += ai[j] * xi;
    }
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

// A += s * B
inline void add_scaled(Matrix& a, const Matrix& b, double s) {
    require(a.same_shape(b), "add_scaled: shape mismatch");
    const size_t n = a.data.size();
    for (size_t i = 0; i < n; ++i) a.data[i] += s * b.data[i];
}

inline void scale(Matrix& a, double s) {
    for (double& v : a.data) v *= s;
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::abs(v));
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    require(a.same_shape(b), "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

inline double sum_squares(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return s;
}

inline bool all_finite(const Matrix& a) {
    for (double v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool all_finite(const Vector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace rnnlab
