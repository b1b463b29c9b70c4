#pragma once

// Truncated three-factor learning rule built on eligibility traces.
//
// The full real-time recurrent gradient for w_h[ij] couples all hidden
// units. Keeping only the self-coupling (l = i) term yields a per-synapse
// trace that the postsynaptic neuron can carry locally:
//
//   eps_{ij,t+1} = d_{i,t} * eps_{ij,t} + (1-a) * f(h_{j,t})
//
// with the decay factor depending on the trace mode:
//   full_diag: d_{i,t} = a + (1-a) * w_h[ii] * f'(h_{i,t})
//   leak_only: d_{i,t} = a
//   one_step:  no carry-over at all; the trace is just the immediate term,
//              which matches detaching the previous hidden state in the
//              forward graph.
//
// The gradient combines traces with a learning signal broadcast from the
// readout error, ls_{i,t} = f'(h_{i,t+1}) * (W_out^T dL/dyhat_t)_i:
//
//   dL/dw_h[ij] ~ sum_t ls_{i,t} * eps_{ij,t+1}
//
// Input weights use the analogous trace with x_{j,t} in place of f(h_{j,t}).
// The readout gradient has no recurrence and is exact.
//
// Row i of the result depends only on row i of w_h (through d_i), column i
// of w_out, and the trajectory, so with the trajectory held fixed the rule
// is local: perturbing other rows cannot change row i's gradient.

#include <limits>
#include <vector>

#include "gradients.hpp"
#include "loss.hpp"
#include "rnn.hpp"
#include "tasks.hpp"

namespace rnnlab {

enum class TraceMode { full_diag, leak_only, one_step };

inline std::string to_string(TraceMode m) {
    switch (m) {
        case TraceMode::full_diag: return "full_diag";
        case TraceMode::leak_only: return "leak_only";
        case TraceMode::one_step: return "one_step";
    }
    return "?";
}

inline TraceMode trace_mode_from_string(const std::string& s) {
    if (s == "full_diag") return TraceMode::full_diag;
    if (s == "leak_only") return TraceMode::leak_only;
    if (s == "one_step") return TraceMode::one_step;
    throw std::invalid_argument("unknown trace mode: " + s);
}

// Gradients from an already-computed trajectory. The forward pass is not
// re-run, so this is also the entry point for locality probes where the
// trajectory is held fixed while parameters are perturbed.
inline Gradients eprop_from_trajectory(const RnnParams& p, const BatchTrajectory& traj,
                                       const TrialBatch& batch, TraceMode mode) {
    Gradients g(p);
    const int t_steps = traj.t_steps;
    const int b = traj.batch;
    const int n = p.n;
    const double drive = 1.0 - p.alpha;
    LossResult lr = mse_loss_batch(traj.outputs, batch.targets, batch.mask);

    // per-trial traces, stored as stacked rows: row (k*n + i) is trial k's
    // trace row for postsynaptic unit i
    Matrix eps, eta;
    if (mode != TraceMode::one_step) {
        eps = Matrix(b * n, n);
        eta = Matrix(b * n, p.n_in);
    }

    Matrix ls(n, b);
    for (int t = 0; t < t_steps; ++t) {
        const Matrix& r = traj.rates[t];
        const Matrix& h = traj.hidden[t];
        if (mode != TraceMode::one_step) {
            const Matrix& x = batch.inputs[t];
            for (int k = 0; k < b; ++k)
                for (int i = 0; i < n; ++i) {
                    const double d =
                        mode == TraceMode::leak_only
                            ? p.alpha
                            : p.alpha + drive * p.w_h(i, i) * relu_grad(h(i, k));
                    double* erow = eps.row(k * n + i);
                    for (int j = 0; j < n; ++j) erow[j] = d * erow[j] + drive * r(j, k);
                    double* xrow = eta.row(k * n + i);
                    for (int j = 0; j < p.n_in; ++j) xrow[j] = d * xrow[j] + drive * x(j, k);
                }
        }

        ls.fill(0.0);
        gemm_t_acc(ls, p.w_out, lr.dloss[t]);
        const Matrix& hnext = traj.hidden[t + 1];
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < b; ++k) ls(i, k) *= relu_grad(hnext(i, k));

        if (mode == TraceMode::one_step) {
            gemm_bt_acc(g.w_h, ls, r, drive);
            gemm_bt_acc(g.w_x, ls, batch.inputs[t], drive);
        } else {
            for (int k = 0; k < b; ++k)
                for (int i = 0; i < n; ++i) {
                    const double s = ls(i, k);
                    if (s == 0.0) continue;
                    const double* erow = eps.row(k * n + i);
                    double* gi = g.w_h.row(i);
                    for (int j = 0; j < n; ++j) gi[j] += s * erow[j];
                    const double* xrow = eta.row(k * n + i);
                    double* gx = g.w_x.row(i);
                    for (int j = 0; j < p.n_in; ++j) gx[j] += s * xrow[j];
                }
        }
        gemm_bt_acc(g.w_out, lr.dloss[t], traj.rates[t + 1]);
    }
    return g;
}

inline GradientResult eprop_gradients(const RnnParams& p, const TrialBatch& batch,
                                      TraceMode mode = TraceMode::full_diag) {
    GradientResult res;
    res.grads = Gradients(p);
    BatchTrajectory traj = forward_batch(p, batch.inputs);
    if (traj.diverged) {
        res.diverged = true;
        res.loss = std::numeric_limits<double>::quiet_NaN();
        return res;
    }
    res.loss = mse_loss_batch(traj.outputs, batch.targets, batch.mask).loss;
    res.grads = eprop_from_trajectory(p, traj, batch, mode);
    return res;
}

}  // namespace rnnlab
