#pragma once

// Leaky ReLU recurrent network: state update, forward simulation, and the
// one-step state Jacobian.
//
// Dynamics per step:
//     h' = alpha * h + (1 - alpha) * (W_h relu(h) + W_x x)
// with linear readout y = W_out relu(h). There is no per-step noise and no
// readout bias. relu'(0) is taken as 0, so silent units contribute nothing
// to the Jacobian, consistent with the forward truncation used by the
// learning rules.
//
// Initialization: W_h entries ~ N(0, gain^2/N), W_x ~ N(0, 1/N_in),
// W_out ~ N(0, 1/N), drawn in that order (each row-major) from the stream
// passed to init_params. h0 is the zero vector for all trials.

#include <cmath>
#include <vector>

#include "matrix.hpp"
#include "rng.hpp"

namespace rnnlab {

struct ArchConfig {
    int n = 64;
    int n_in = 1;
    int n_out = 1;
    double alpha = 0.8;  // leak factor, 1 - dt/tau

    void validate() const {
        require(n > 0 && n_in > 0 && n_out > 0, "ArchConfig: dimensions must be positive");
        require(alpha >= 0.0 && alpha <= 1.0, "ArchConfig: alpha must be in [0,1]");
    }
};

struct RnnParams {
    Matrix w_h;    // N x N
    Matrix w_x;    // N x N_in
    Matrix w_out;  // N_out x N
    double alpha = 0.8;
    int n = 0;
    int n_in = 0;
    int n_out = 0;

    void validate() const {
        require(n > 0 && n_in > 0 && n_out > 0, "RnnParams: dimensions must be positive");
        require(alpha >= 0.0 && alpha <= 1.0, "RnnParams: alpha must be in [0,1]");
        require(w_h.rows == n && w_h.cols == n && w_x.rows == n && w_x.cols == n_in &&
                    w_out.rows == n_out && w_out.cols == n,
                "RnnParams: matrix shapes inconsistent");
    }
};

inline RnnParams init_params(const ArchConfig& cfg, double gain, RngStream& rng) {
    cfg.validate();
    require(gain >= 0.0, "init_params: gain must be >= 0");
    RnnParams p;
    p.n = cfg.n;
    p.n_in = cfg.n_in;
    p.n_out = cfg.n_out;
    p.alpha = cfg.alpha;
    p.w_h = gaussian_matrix(rng, cfg.n, cfg.n, gain / std::sqrt(static_cast<double>(cfg.n)));
    p.w_x = gaussian_matrix(rng, cfg.n, cfg.n_in, 1.0 / std::sqrt(static_cast<double>(cfg.n_in)));
    p.w_out = gaussian_matrix(rng, cfg.n_out, cfg.n, 1.0 / std::sqrt(static_cast<double>(cfg.n)));
    return p;
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double relu_grad(double x) { return x > 0.0 ? 1.0 : 0.0; }

inline Vector relu(const Vector& v) {
    Vector r(v.size());
    for (size_t i = 0; i < v.size(); ++i) r[i] = relu(v[i]);
    return r;
}

// One Euler step of the hidden dynamics.
inline Vector step(const RnnParams& p, const Vector& h, const Vector& x) {
    require(static_cast<int>(h.size()) == p.n && static_cast<int>(x.size()) == p.n_in,
            "step: dimension mismatch");
    Vector drive(p.n, 0.0);
    matvec_acc(drive, p.w_h, relu(h));
    matvec_acc(drive, p.w_x, x);
    Vector out(p.n);
    for (int i = 0; i < p.n; ++i) out[i] = p.alpha * h[i] + (1.0 - p.alpha) * drive[i];
    return out;
}

// D = alpha I + (1 - alpha) W_h diag(relu'(h))
inline Matrix jacobian_step(const RnnParams& p, const Vector& h) {
    require(static_cast<int>(h.size()) == p.n, "jacobian_step: dimension mismatch");
    Matrix d(p.n, p.n);
    for (int i = 0; i < p.n; ++i) {
        const double* wi = p.w_h.row(i);
        double* di = d.row(i);
        for (int j = 0; j < p.n; ++j) di[j] = (1.0 - p.alpha) * wi[j] * relu_grad(h[j]);
        di[i] += p.alpha;
    }
    return d;
}

// States above this magnitude mark the trajectory as diverged (recorded,
// not fatal).
inline constexpr double kDivergenceThreshold = 1e6;

struct Trajectory {
    std::vector<Vector> hidden;   // T+1 states, h_0 .. h_T
    std::vector<Vector> rates;    // T+1 vectors relu(h_t)
    std::vector<Vector> outputs;  // T vectors, outputs[t] = W_out relu(h_{t+1})
    bool diverged = false;

    int t_steps() const { return static_cast<int>(outputs.size()); }
};

inline Trajectory forward(const RnnParams& p, const std::vector<Vector>& inputs, const Vector& h0) {
    require(static_cast<int>(h0.size()) == p.n, "forward: h0 dimension mismatch");
    Trajectory traj;
    const int t_steps = static_cast<int>(inputs.size());
    traj.hidden.reserve(t_steps + 1);
    traj.rates.reserve(t_steps + 1);
    traj.outputs.reserve(t_steps);
    traj.hidden.push_back(h0);
    traj.rates.push_back(relu(h0));
    for (int t = 0; t < t_steps; ++t) {
        Vector h = step(p, traj.hidden.back(), inputs[t]);
        for (double v : h)
            if (!(std::abs(v) <= kDivergenceThreshold)) traj.diverged = true;
        traj.rates.push_back(relu(h));
        traj.outputs.push_back(matvec(p.w_out, traj.rates.back()));
        traj.hidden.push_back(std::move(h));
    }
    return traj;
}

// Batched forward pass: B trials advance together, states held as N x B
// matrices. Column b of every matrix is bit-identical to a single-trial
// forward() on trial b.
struct BatchTrajectory {
    int t_steps = 0;
    int batch = 0;
    std::vector<Matrix> hidden;   // T+1 of N x B
    std::vector<Matrix> rates;    // T+1 of N x B
    std::vector<Matrix> outputs;  // T of N_out x B
    bool diverged = false;
};

inline Matrix relu(const Matrix& m) {
    Matrix r(m.rows, m.cols);
    for (size_t i = 0; i < m.data.size(); ++i) r.data[i] = relu(m.data[i]);
    return r;
}

// inputs: T matrices of shape N_in x B. h0 is the zero state.
inline BatchTrajectory forward_batch(const RnnParams& p, const std::vector<Matrix>& inputs) {
    BatchTrajectory traj;
    traj.t_steps = static_cast<int>(inputs.size());
    traj.batch = traj.t_steps > 0 ? inputs[0].cols : 0;
    const int b = traj.batch;
    traj.hidden.reserve(traj.t_steps + 1);
    traj.rates.reserve(traj.t_steps + 1);
    traj.outputs.reserve(traj.t_steps);
    traj.hidden.emplace_back(p.n, b);
    traj.rates.emplace_back(p.n, b);
    for (int t = 0; t < traj.t_steps; ++t) {
        require(inputs[t].rows == p.n_in && inputs[t].cols == b, "forward_batch: input shape mismatch");
        Matrix drive(p.n, b);
        gemm_acc(drive, p.w_h, traj.rates.back());
        gemm_acc(drive, p.w_x, inputs[t]);
        const Matrix& h_prev = traj.hidden.back();
        Matrix h(p.n, b);
        for (size_t i = 0; i < h.data.size(); ++i) {
            h.data[i] = p.alpha * h_prev.data[i] + (1.0 - p.alpha) * drive.data[i];
            if (!(std::abs(h.data[i]) <= kDivergenceThreshold)) traj.diverged = true;
        }
        traj.rates.push_back(relu(h));
        Matrix y(p.n_out, b);
        gemm_acc(y, p.w_out, traj.rates.back());
        traj.outputs.push_back(std::move(y));
        traj.hidden.push_back(std::move(h));
    }
    return traj;
}

}  // namespace rnnlab
