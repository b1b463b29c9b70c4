#pragma once

// Householder QR for square and tall matrices (rows >= cols).
//
// Convention: A = Q R with Q (rows x cols) having orthonormal columns and R
// (cols x cols) upper triangular with nonnegative diagonal. The diagonal
// sign is fixed after the factorization so the decomposition is unique for
// nonsingular input; the Benettin Lyapunov loop and its adjoint rely on
// that convention.
//
// Gram-Schmidt is deliberately not used here: long chains of Jacobian
// factorizations need the backward stability of Householder reflections.

#include <cmath>
#include <vector>

#include "matrix.hpp"

namespace rnnlab {

struct QrResult {
    Matrix q;  // rows x cols, orthonormal columns
    Matrix r;  // cols x cols, upper triangular, diag >= 0
    bool rank_deficient = false;
};

// Diagonal entries with |r_jj| below this are flagged instead of crashing.
inline constexpr double kQrRankTol = 1e-300;

inline QrResult qr_decompose(const Matrix& a) {
    const int n = a.rows, k = a.cols;
    require(n >= k, "qr_decompose: need rows >= cols");
    Matrix w = a;  // working copy, reduced in place
    // reflector j is stored as v (length n-j) with scale beta = 2 / v'v
    std::vector<Vector> vs(k);
    std::vector<double> betas(k, 0.0);

    for (int j = 0; j < k; ++j) {
        double norm2 = 0.0;
        for (int i = j; i < n; ++i) norm2 += w(i, j) * w(i, j);
        const double norm = std::sqrt(norm2);
        if (norm == 0.0) continue;  // zero column, reflector = identity
        const double x0 = w(j, j);
        const double alpha = (x0 >= 0.0) ? -norm : norm;
        Vector v(n - j);
        v[0] = x0 - alpha;
        for (int i = j + 1; i < n; ++i) v[i - j] = w(i, j);
        double vtv = 0.0;
        for (double x : v) vtv += x * x;
        if (vtv == 0.0) continue;
        const double beta = 2.0 / vtv;
        // apply H = I - beta v v' to the remaining columns
        w(j, j) = alpha;
        for (int i = j + 1; i < n; ++i) w(i, j) = 0.0;
        for (int c = j + 1; c < k; ++c) {
            double dot = 0.0;
            for (int i = j; i < n; ++i) dot += v[i - j] * w(i, c);
            const double s = beta * dot;
            for (int i = j; i < n; ++i) w(i, c) -= s * v[i - j];
        }
        vs[j] = std::move(v);
        betas[j] = beta;
    }

    QrResult out;
    out.r = Matrix(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = i; j < k; ++j) out.r(i, j) = w(i, j);

    // form Q = H_0 ... H_{k-1} applied to the leading k columns of I
    out.q = Matrix(n, k);
    for (int j = 0; j < k; ++j) out.q(j, j) = 1.0;
    for (int j = k - 1; j >= 0; --j) {
        if (vs[j].empty()) continue;
        const Vector& v = vs[j];
        const double beta = betas[j];
        for (int c = 0; c < k; ++c) {
            double dot = 0.0;
            for (int i = j; i < n; ++i) dot += v[i - j] * out.q(i, c);
            const double s = beta * dot;
            for (int i = j; i < n; ++i) out.q(i, c) -= s * v[i - j];
        }
    }

    // fix signs so diag(R) >= 0; A = (Q S)(S R) for S = diag(+-1)
    for (int j = 0; j < k; ++j) {
        if (out.r(j, j) < 0.0) {
            for (int c = j; c < k; ++c) out.r(j, c) = -out.r(j, c);
            for (int i = 0; i < n; ++i) out.q(i, j) = -out.q(i, j);
        }
        if (std::abs(out.r(j, j)) < kQrRankTol) out.rank_deficient = true;
    }
    return out;
}

}  // namespace rnnlab
