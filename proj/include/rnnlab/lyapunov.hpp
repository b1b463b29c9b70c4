#pragma once

// Lyapunov spectrum estimation along driven trajectories (Benettin's
// reorthonormalization method).
//
// An orthonormal basis Q of k tangent directions is pushed through the
// step Jacobian J_t = a I + (1-a) W_h diag(f'(h_t)) and re-orthonormalized
// by QR after every step. Post-warmup, the log diagonal of R accumulates;
// lambda_i = sum_t ln R_ii / steps, in nats per step, sorted descending.
//
// The driving input comes from an InputStream so the same estimator serves
// autonomous dynamics (zero input), the constant-input analytic regime, and
// task-driven dynamics (fresh trials concatenated end to end).
//
// Degeneracies are reported rather than hidden: a collapsed direction
// (R_ii below kQrRankTol) pins that exponent to -inf and sets a flag, and a
// non-finite hidden state stops the run early with the divergence flag set.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "matrix.hpp"
#include "qr.hpp"
#include "rng.hpp"
#include "rnn.hpp"
#include "tasks.hpp"

namespace rnnlab {

class InputStream {
  public:
    virtual ~InputStream() = default;
    virtual const Vector& next() = 0;  // input vector for the upcoming step
    virtual int n_in() const = 0;
};

class ZeroInput : public InputStream {
  public:
    explicit ZeroInput(int n_in) : x_(n_in, 0.0) {}
    const Vector& next() override { return x_; }
    int n_in() const override { return static_cast<int>(x_.size()); }

  private:
    Vector x_;
};

class ConstantInput : public InputStream {
  public:
    explicit ConstantInput(Vector x) : x_(std::move(x)) {}
    const Vector& next() override { return x_; }
    int n_in() const override { return static_cast<int>(x_.size()); }

  private:
    Vector x_;
};

// Concatenates freshly generated single trials of a task, so the measured
// dynamics see the same input statistics as training.
class TaskInputStream : public InputStream {
  public:
    TaskInputStream(TaskConfig cfg, RngStream rng) : cfg_(std::move(cfg)), rng_(rng) {
        cfg_.batch = 1;
        cfg_.validate();
        x_.resize(cfg_.n_in());
    }

    const Vector& next() override {
        if (t_ == trial_.t_steps) t_ = 0;
        if (t_ == 0) trial_ = gen_trials(cfg_, rng_);
        for (int c = 0; c < static_cast<int>(x_.size()); ++c) x_[c] = trial_.inputs[t_](c, 0);
        ++t_;
        return x_;
    }

    int n_in() const override { return static_cast<int>(x_.size()); }

  private:
    TaskConfig cfg_;
    RngStream rng_;
    TrialBatch trial_;
    int t_ = 0;
    Vector x_;
};

struct LyapunovConfig {
    int k = 1;           // number of exponents
    int warmup = 200;    // steps before accumulation starts
    int horizon = 2000;  // accumulated steps
};

struct LyapunovEstimate {
    int k = 0;
    Vector lambdas;              // nats per step, sorted descending
    Matrix running_means;        // steps_used x k partial estimates, for convergence reporting
    int warmup_steps = 0;
    int total_steps = 0;         // warmup + accumulated steps actually evolved
    bool rank_collapsed = false; // some direction fell below kQrRankTol
    bool diverged = false;       // hidden state left the finite regime
    int steps_used = 0;          // post-warmup steps actually accumulated
};

// Orthonormal starting basis. Drawn column-by-column so the k = 1 basis is
// exactly the first column of any larger basis from the same stream state.
inline Matrix lyapunov_q0(int n, int k, RngStream& rng) {
    Matrix g = gaussian_matrix_by_columns(rng, n, k, 1.0);
    return qr_decompose(g).q;
}

inline LyapunovEstimate lyapunov_spectrum(const RnnParams& p, InputStream& stream,
                                          const LyapunovConfig& cfg, const Matrix& q0) {
    p.validate();
    require(cfg.k >= 1 && cfg.k <= p.n, "lyapunov_spectrum: k out of range");
    require(cfg.warmup >= 0, "lyapunov_spectrum: bad warmup");
    require(cfg.horizon >= 100, "lyapunov_spectrum: horizon must be >= 100");
    require(q0.rows == p.n && q0.cols == cfg.k, "lyapunov_spectrum: q0 shape mismatch");
    require(stream.n_in() == p.n_in, "lyapunov_spectrum: stream width mismatch");

    const double drive = 1.0 - p.alpha;
    Matrix q = q0;
    Matrix scaled(p.n, cfg.k);
    Vector h(p.n, 0.0);
    Vector log_sum(cfg.k, 0.0);
    std::vector<bool> collapsed(cfg.k, false);

    LyapunovEstimate est;
    est.k = cfg.k;
    est.warmup_steps = cfg.warmup;
    Matrix partial(cfg.horizon, cfg.k);
    const int total = cfg.warmup + cfg.horizon;
    for (int s = 0; s < total; ++s) {
        // tangent propagation: A = a Q + (1-a) W_h (diag(f'(h)) Q)
        for (int i = 0; i < p.n; ++i) {
            const double m = relu_grad(h[i]);
            for (int j = 0; j < cfg.k; ++j) scaled(i, j) = m * q(i, j);
        }
        Matrix a = q;
        scale(a, p.alpha);
        gemm_acc(a, p.w_h, scaled, drive);
        QrResult f = qr_decompose(a);
        q = std::move(f.q);
        if (f.rank_deficient) est.rank_collapsed = true;
        if (s >= cfg.warmup) {
            for (int j = 0; j < cfg.k; ++j) {
                const double rjj = f.r(j, j);
                if (rjj < kQrRankTol) collapsed[j] = true;
                log_sum[j] += std::log(rjj);
                partial(est.steps_used, j) = log_sum[j] / (est.steps_used + 1);
            }
            est.steps_used += 1;
        }
        est.total_steps += 1;
        h = step(p, h, stream.next());
        if (!all_finite(h)) {
            est.diverged = true;
            break;
        }
    }

    Vector finals(cfg.k, std::numeric_limits<double>::quiet_NaN());
    if (est.steps_used > 0) {
        for (int j = 0; j < cfg.k; ++j) {
            finals[j] = collapsed[j] ? -std::numeric_limits<double>::infinity()
                                     : log_sum[j] / est.steps_used;
            if (collapsed[j]) est.rank_collapsed = true;
        }
    }
    // Sort exponents descending, carrying the per-direction running means along.
    std::vector<int> order(cfg.k);
    for (int j = 0; j < cfg.k; ++j) order[j] = j;
    if (est.steps_used > 0) {
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return finals[a] > finals[b]; });
    }
    est.lambdas.assign(cfg.k, std::numeric_limits<double>::quiet_NaN());
    est.running_means = Matrix(est.steps_used, cfg.k);
    for (int j = 0; j < cfg.k; ++j) {
        est.lambdas[j] = finals[order[j]];
        for (int s = 0; s < est.steps_used; ++s) est.running_means(s, j) = partial(s, order[j]);
    }
    return est;
}

inline LyapunovEstimate lyapunov_spectrum(const RnnParams& p, InputStream& stream,
                                          const LyapunovConfig& cfg, RngStream& rng) {
    Matrix q0 = lyapunov_q0(p.n, cfg.k, rng);
    return lyapunov_spectrum(p, stream, cfg, q0);
}

inline LyapunovEstimate lyapunov_spectrum(const RnnParams& p, InputStream& stream, int k,
                                          int warmup, int horizon, RngStream& rng) {
    LyapunovConfig cfg;
    cfg.k = k;
    cfg.warmup = warmup;
    cfg.horizon = horizon;
    return lyapunov_spectrum(p, stream, cfg, rng);
}

inline double max_lyapunov(const RnnParams& p, InputStream& stream, int warmup, int horizon,
                           RngStream& rng) {
    LyapunovConfig cfg;
    cfg.k = 1;
    cfg.warmup = warmup;
    cfg.horizon = horizon;
    return lyapunov_spectrum(p, stream, cfg, rng).lambdas[0];
}

}  // namespace rnnlab
