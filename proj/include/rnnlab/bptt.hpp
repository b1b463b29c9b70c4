#pragma once

// Exact gradients by backpropagation through time, batched over trials.
//
// With h_{s+1} = a h_s + (1-a)(W_h f(h_s) + W_x x_s) and yhat_s = W_out f(h_{s+1}),
// the adjoint recursion over delta_s = dL/dh_s is
//
//   delta_T = f'(h_T) o (W_out^T e_{T-1})
//   delta_s = a delta_{s+1} + f'(h_s) o (W_out^T e_{s-1} + (1-a) W_h^T delta_{s+1})
//
// where e_t = dL/dyhat_t from the masked MSE. Parameter gradients accumulate
//   dL/dW_h   += (1-a) delta_{s} f(h_{s-1})^T
//   dL/dW_x   += (1-a) delta_{s} x_{s-1}^T
//   dL/dW_out += e_{s-1} f(h_s)^T
// over s = 1..T.

#include <limits>
#include <vector>

#include "gradients.hpp"
#include "loss.hpp"
#include "rnn.hpp"
#include "tasks.hpp"

namespace rnnlab {

// Forward + loss only; handy for finite-difference checks and evaluation.
// Returns NaN if the forward pass diverges.
inline double batch_loss(const RnnParams& p, const TrialBatch& batch) {
    BatchTrajectory traj = forward_batch(p, batch.inputs);
    if (traj.diverged) return std::numeric_limits<double>::quiet_NaN();
    return mse_loss_batch(traj.outputs, batch.targets, batch.mask).loss;
}

inline GradientResult bptt_gradients(const RnnParams& p, const TrialBatch& batch) {
    GradientResult res;
    res.grads = Gradients(p);
    BatchTrajectory traj = forward_batch(p, batch.inputs);
    if (traj.diverged) {
        res.diverged = true;
        res.loss = std::numeric_limits<double>::quiet_NaN();
        return res;
    }
    LossResult lr = mse_loss_batch(traj.outputs, batch.targets, batch.mask);
    res.loss = lr.loss;

    const int t_steps = traj.t_steps;
    const int b = traj.batch;
    const double leak = p.alpha;
    const double drive = 1.0 - p.alpha;

    Matrix delta(p.n, b);  // dL/dh_{s+1} from the previous (later) step
    for (int s = t_steps; s >= 1; --s) {
        Matrix next(p.n, b);
        gemm_t_acc(next, p.w_out, lr.dloss[s - 1]);  // W_out^T e_{s-1}
        if (s < t_steps) {
            Matrix prop(p.n, b);
            gemm_t_acc(prop, p.w_h, delta);  // W_h^T delta_{s+1}
            const Matrix& h = traj.hidden[s];
            for (int i = 0; i < p.n; ++i)
                for (int j = 0; j < b; ++j)
                    next(i, j) = leak * delta(i, j) +
                                 relu_grad(h(i, j)) * (next(i, j) + drive * prop(i, j));
        } else {
            const Matrix& h = traj.hidden[s];
            for (int i = 0; i < p.n; ++i)
                for (int j = 0; j < b; ++j) next(i, j) *= relu_grad(h(i, j));
        }
        gemm_bt_acc(res.grads.w_h, next, traj.rates[s - 1], drive);
        gemm_bt_acc(res.grads.w_x, next, batch.inputs[s - 1], drive);
        gemm_bt_acc(res.grads.w_out, lr.dloss[s - 1], traj.rates[s]);
        delta = std::move(next);
    }
    return res;
}

}  // namespace rnnlab
