#pragma once

// Masked mean-squared-error loss over a batch of trials.
//
// Per trial: sum of mask * (yhat - y)^2 over all steps and output channels,
// divided by that trial's masked entry count. The batch loss is the plain
// mean of per-trial losses, so trials with short decision epochs are not
// underweighted. A trial with an all-zero mask is a configuration error.

#include <vector>

#include "matrix.hpp"

namespace rnnlab {

struct LossResult {
    double loss = 0.0;
    std::vector<Matrix> dloss;  // T matrices, n_out x B: dL/dyhat_t
};

// outputs/targets/mask: T matrices of shape n_out x B.
inline LossResult mse_loss_batch(const std::vector<Matrix>& outputs,
                                 const std::vector<Matrix>& targets,
                                 const std::vector<Matrix>& mask) {
    const int t_steps = static_cast<int>(outputs.size());
    require(targets.size() == outputs.size() && mask.size() == outputs.size(),
            "mse_loss_batch: length mismatch");
    require(t_steps > 0, "mse_loss_batch: empty sequence");
    const int n_out = outputs[0].rows;
    const int batch = outputs[0].cols;

    std::vector<double> masked_count(batch, 0.0);
    for (int t = 0; t < t_steps; ++t) {
        require(outputs[t].rows == n_out && outputs[t].cols == batch &&
                    targets[t].rows == n_out && targets[t].cols == batch &&
                    mask[t].rows == n_out && mask[t].cols == batch,
                "mse_loss_batch: shape mismatch");
        for (int b = 0; b < batch; ++b)
            for (int c = 0; c < n_out; ++c) masked_count[b] += mask[t](c, b);
    }
    for (int b = 0; b < batch; ++b)
        require(masked_count[b] > 0.0, "mse_loss_batch: trial has no masked steps");

    LossResult res;
    res.dloss.assign(t_steps, Matrix(n_out, batch));
    double total = 0.0;
    for (int t = 0; t < t_steps; ++t)
        for (int b = 0; b < batch; ++b)
            for (int c = 0; c < n_out; ++c) {
                const double m = mask[t](c, b);
                if (m == 0.0) continue;
                const double e = outputs[t](c, b) - targets[t](c, b);
                total += m * e * e / masked_count[b];
                res.dloss[t](c, b) = 2.0 * m * e / (masked_count[b] * batch);
            }
    res.loss = total / batch;
    return res;
}

}  // namespace rnnlab
