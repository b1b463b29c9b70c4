#pragma once

// Gradient flossing: pretraining that pushes Lyapunov exponents toward zero
// by minimizing L = sum_i clamp(lambda_i, +-50)^2 in the recurrent weights.
//
// The exponents come from the same tangent chain as the Benettin estimator:
//   A_s = a Q_s + (1-a) W_h (diag(m_s) Q_s),   (Q_{s+1}, R_s) = qr(A_s)
//   lambda_i = (1/horizon) sum_{s >= warmup} ln R_s[ii]
// where m_s = f'(h_s) along a driven trajectory. The masks are treated as
// constants of the optimization (the trajectory is not differentiated
// through), which makes the loss a pure function of W_h given (masks, q0)
// and gives W_x and W_out exactly zero gradient.
//
// Backward through each QR factorization uses the standard thin-QR adjoint
//   M = R Rbar^T - Qbar^T Q,  H = copyltu(M),  Abar = (Qbar + Q H) R^{-T}
// with copyltu mirroring the lower triangle (diagonal included) upward.
// R^{-T} is applied by row-wise back-substitution. Rbar is diagonal:
// 2 lambda_i / (horizon * R_s[ii]) on accumulated steps, zero elsewhere and
// zero for saturated (clamped) exponents.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "adam.hpp"
#include "gradients.hpp"
#include "lyapunov.hpp"
#include "matrix.hpp"
#include "qr.hpp"
#include "rng.hpp"
#include "rnn.hpp"

namespace rnnlab {

inline constexpr double kLambdaClamp = 50.0;

struct FlossConfig {
    int k = 1;               // number of exponents to floss
    int pretrain_iters = 100;
    int warmup = 100;        // tangent-chain steps before accumulation
    int horizon = 500;       // accumulated steps
    double lr = 1e-2;        // Adam step size on w_h
};

// Sum of squared (clamped) exponents measured by the Benettin estimator over
// the flossing horizon. Rank collapse surfaces as the capped penalty k*2500.
inline double flossing_loss(const RnnParams& p, InputStream& stream, const FlossConfig& cfg,
                            RngStream& rng) {
    LyapunovConfig ly;
    ly.k = cfg.k;
    ly.warmup = cfg.warmup;
    ly.horizon = cfg.horizon;
    LyapunovEstimate est = lyapunov_spectrum(p, stream, ly, rng);
    double loss = 0.0;
    for (double l : est.lambdas) {
        const double c = std::clamp(l, -kLambdaClamp, kLambdaClamp);
        loss += c * c;
    }
    return loss;
}

// One driven rollout reduced to its ReLU derivative masks, the only part of
// the trajectory the tangent chain needs.
struct MaskTrajectory {
    std::vector<Vector> masks;  // one n-vector per step
    bool diverged = false;
};

inline MaskTrajectory collect_masks(const RnnParams& p, InputStream& stream, int steps) {
    require(stream.n_in() == p.n_in, "collect_masks: stream width mismatch");
    MaskTrajectory out;
    out.masks.reserve(steps);
    Vector h(p.n, 0.0);
    for (int s = 0; s < steps; ++s) {
        Vector m(p.n);
        for (int i = 0; i < p.n; ++i) m[i] = relu_grad(h[i]);
        out.masks.push_back(std::move(m));
        h = step(p, h, stream.next());
        if (!all_finite(h)) {
            out.diverged = true;
            break;
        }
    }
    return out;
}

struct FlossChain {
    std::vector<Matrix> q;  // S+1 bases, q[0] = q0
    std::vector<Matrix> r;  // S factors, k x k
    Vector lambdas;         // unsorted (basis order), nats per step
    double loss = 0.0;
    bool degenerate = false;  // rank collapse: gradients are unreliable
};

inline FlossChain floss_forward(const RnnParams& p, const std::vector<Vector>& masks,
                                const Matrix& q0, int warmup, int horizon, bool record) {
    const int steps = warmup + horizon;
    const int k = q0.cols;
    require(static_cast<int>(masks.size()) >= steps, "floss_forward: not enough mask steps");
    require(q0.rows == p.n && k >= 1 && k <= p.n, "floss_forward: bad q0");
    require(warmup >= 0 && horizon >= 1, "floss_forward: bad warmup/horizon");

    FlossChain chain;
    chain.lambdas.assign(k, 0.0);
    Matrix q = q0;
    if (record) {
        chain.q.reserve(steps + 1);
        chain.r.reserve(steps);
        chain.q.push_back(q0);
    }
    Matrix scaled(p.n, k);
    const double drive = 1.0 - p.alpha;
    for (int s = 0; s < steps; ++s) {
        const Vector& m = masks[s];
        for (int i = 0; i < p.n; ++i)
            for (int j = 0; j < k; ++j) scaled(i, j) = m[i] * q(i, j);
        Matrix a = q;
        scale(a, p.alpha);
        gemm_acc(a, p.w_h, scaled, drive);
        QrResult f = qr_decompose(a);
        q = f.q;
        if (s >= warmup)
            for (int j = 0; j < k; ++j) {
                if (f.r(j, j) < kQrRankTol) chain.degenerate = true;
                chain.lambdas[j] += std::log(f.r(j, j));
            }
        if (record) {
            chain.q.push_back(std::move(f.q));
            chain.r.push_back(std::move(f.r));
        }
    }
    for (int j = 0; j < k; ++j) {
        chain.lambdas[j] /= horizon;
        const double c = std::clamp(chain.lambdas[j], -kLambdaClamp, kLambdaClamp);
        chain.loss += c * c;
    }
    return chain;
}

// Loss only; pure in w_h for fixed (masks, q0). The finite-difference
// oracle for the gradient below perturbs w_h entries through this.
inline double floss_eval(const RnnParams& p, const std::vector<Vector>& masks, const Matrix& q0,
                         int warmup, int horizon) {
    return floss_forward(p, masks, q0, warmup, horizon, false).loss;
}

namespace detail {

inline Matrix copyltu(const Matrix& m) {
    Matrix h(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) h(i, j) = i >= j ? m(i, j) : m(j, i);
    return h;
}

// Solves x R^T = z for x, i.e. R x_row^T = z_row^T per row, by
// back-substitution in the upper-triangular R.
inline Matrix solve_rt(const Matrix& z, const Matrix& r) {
    const int k = r.rows;
    Matrix x(z.rows, k);
    for (int i = 0; i < z.rows; ++i) {
        const double* zi = z.row(i);
        double* xi = x.row(i);
        for (int j = k - 1; j >= 0; --j) {
            double acc = zi[j];
            for (int l = j + 1; l < k; ++l) acc -= r(j, l) * xi[l];
            xi[j] = acc / r(j, j);
        }
    }
    return x;
}

}  // namespace detail

struct FlossResult {
    double loss = 0.0;
    Vector lambdas;   // basis order
    Matrix w_h_grad;  // dL/dW_h; w_x and w_out receive no gradient
    bool degenerate = false;
};

inline FlossResult flossing_gradients(const RnnParams& p, const std::vector<Vector>& masks,
                                      const Matrix& q0, int warmup, int horizon) {
    FlossChain chain = floss_forward(p, masks, q0, warmup, horizon, true);
    FlossResult res;
    res.loss = chain.loss;
    res.lambdas = chain.lambdas;
    res.w_h_grad = Matrix(p.n, p.n);
    res.degenerate = chain.degenerate;
    if (chain.degenerate) return res;  // zero gradient; caller decides what to do

    const int steps = warmup + horizon;
    const int k = q0.cols;
    const double drive = 1.0 - p.alpha;

    Vector dl_dlambda(k);
    for (int j = 0; j < k; ++j)
        dl_dlambda[j] =
            std::abs(chain.lambdas[j]) <= kLambdaClamp ? 2.0 * chain.lambdas[j] : 0.0;

    Matrix qbar(p.n, k);  // dL/dQ_{s+1}, zero at the end of the chain
    Matrix tmp(p.n, k);
    for (int s = steps - 1; s >= 0; --s) {
        const Matrix& r = chain.r[s];
        Vector rbar(k, 0.0);
        if (s >= warmup)
            for (int j = 0; j < k; ++j) rbar[j] = dl_dlambda[j] / (horizon * r(j, j));

        Matrix m(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) m(i, j) = r(i, j) * rbar[j];  // R Rbar^T
        gemm_t_acc(m, qbar, chain.q[s + 1], -1.0);                    // - Qbar^T Q
        Matrix h = detail::copyltu(m);

        Matrix z = qbar;
        gemm_acc(z, chain.q[s + 1], h);  // Qbar + Q H
        Matrix abar = detail::solve_rt(z, r);

        const Vector& mask = masks[s];
        Matrix mq(p.n, k);
        for (int i = 0; i < p.n; ++i)
            for (int j = 0; j < k; ++j) mq(i, j) = mask[i] * chain.q[s](i, j);
        gemm_bt_acc(res.w_h_grad, abar, mq, drive);

        tmp.fill(0.0);
        gemm_t_acc(tmp, p.w_h, abar);  // W_h^T Abar
        for (int i = 0; i < p.n; ++i)
            for (int j = 0; j < k; ++j)
                qbar(i, j) = p.alpha * abar(i, j) + drive * mask[i] * tmp(i, j);
    }
    return res;
}

// Stream-driven form: rolls the network out once to freeze the masks, draws
// the starting basis from rng, and differentiates the resulting chain. The
// input and readout weights receive exactly zero gradient. A diverged rollout
// yields a NaN loss; a rank-collapsed chain yields its (clamped) loss with a
// zero gradient. Callers that need the flags use the mask-level overload.
inline std::pair<double, Gradients> flossing_gradients(const RnnParams& p, InputStream& stream,
                                                       const FlossConfig& cfg, RngStream& rng) {
    Gradients g(p);
    MaskTrajectory mt = collect_masks(p, stream, cfg.warmup + cfg.horizon);
    Matrix q0 = lyapunov_q0(p.n, cfg.k, rng);
    if (mt.diverged) return {std::numeric_limits<double>::quiet_NaN(), std::move(g)};
    FlossResult res = flossing_gradients(p, mt.masks, q0, cfg.warmup, cfg.horizon);
    g.w_h = std::move(res.w_h_grad);
    if (res.degenerate) g.w_h.fill(0.0);
    return {res.loss, std::move(g)};
}

struct FlossIteration {
    double loss = std::numeric_limits<double>::quiet_NaN();
    Vector lambdas;
    bool skipped = false;  // degenerate chain or diverged rollout; no update applied
};

struct FlossHistory {
    std::vector<FlossIteration> iters;
};

using StreamFactory = std::function<std::unique_ptr<InputStream>()>;

// Runs cfg.pretrain_iters flossing steps on w_h in place (Adam, w_h only).
// Each iteration draws a fresh input rollout from make_stream and a fresh
// starting basis from rng. Iterations whose chain is unusable (diverged
// rollout, rank collapse, non-finite loss or gradient) apply no update; five
// such iterations in a row abort the pretraining.
inline FlossHistory pretrain_floss(RnnParams& p, const FlossConfig& cfg,
                                   const StreamFactory& make_stream, RngStream& rng) {
    require(cfg.pretrain_iters >= 0 && cfg.k >= 1 && cfg.k <= p.n, "pretrain_floss: bad config");
    FlossHistory hist;
    hist.iters.reserve(cfg.pretrain_iters);
    AdamConfig acfg;
    acfg.lr = cfg.lr;
    Matrix m(p.n, p.n), v(p.n, p.n);
    long adam_step = 0;
    int bad_streak = 0;
    const int steps = cfg.warmup + cfg.horizon;
    for (int it = 0; it < cfg.pretrain_iters; ++it) {
        std::unique_ptr<InputStream> stream = make_stream();
        MaskTrajectory mt = collect_masks(p, *stream, steps);
        Matrix q0 = lyapunov_q0(p.n, cfg.k, rng);
        FlossIteration rec;
        if (!mt.diverged) {
            FlossResult res = flossing_gradients(p, mt.masks, q0, cfg.warmup, cfg.horizon);
            rec.loss = res.loss;
            rec.lambdas = res.lambdas;
            if (!res.degenerate && std::isfinite(res.loss) && all_finite(res.w_h_grad)) {
                adam_step += 1;
                const double bc1 = 1.0 - std::pow(acfg.beta1, static_cast<double>(adam_step));
                const double bc2 = 1.0 - std::pow(acfg.beta2, static_cast<double>(adam_step));
                detail::adam_block(p.w_h, res.w_h_grad, m, v, acfg, bc1, bc2);
                bad_streak = 0;
                hist.iters.push_back(std::move(rec));
                continue;
            }
        }
        rec.skipped = true;
        hist.iters.push_back(std::move(rec));
        bad_streak += 1;
        if (bad_streak >= 5)
            throw std::runtime_error(
                "pretrain_floss: flossing loss non-finite or degenerate for 5 consecutive "
                "iterations (aborted at iteration " + std::to_string(it + 1) + " of " +
                std::to_string(cfg.pretrain_iters) + ")");
    }
    return hist;
}

}  // namespace rnnlab
