#pragma once

// Shared gradient container for the learning rules, plus global-norm
// clipping applied across all three parameter blocks jointly.

#include <cmath>

#include "matrix.hpp"
#include "rnn.hpp"

namespace rnnlab {

struct Gradients {
    Matrix w_h;    // n x n
    Matrix w_x;    // n x n_in
    Matrix w_out;  // n_out x n

    Gradients() = default;
    explicit Gradients(const RnnParams& p)
        : w_h(p.n, p.n), w_x(p.n, p.n_in), w_out(p.n_out, p.n) {}

    double global_norm() const {
        return std::sqrt(sum_squares(w_h) + sum_squares(w_x) + sum_squares(w_out));
    }

    bool finite() const { return all_finite(w_h) && all_finite(w_x) && all_finite(w_out); }

    void scale_all(double s) {
        scale(w_h, s);
        scale(w_x, s);
        scale(w_out, s);
    }
};

// Scales the gradient so its global norm is at most max_norm. Returns the
// pre-clip norm. max_norm <= 0 disables clipping.
inline double clip_by_global_norm(Gradients& g, double max_norm) {
    const double norm = g.global_norm();
    if (max_norm > 0.0 && norm > max_norm) g.scale_all(max_norm / norm);
    return norm;
}

struct GradientResult {
    Gradients grads;
    double loss = 0.0;
    bool diverged = false;  // forward pass left the finite regime; grads are zero
};

}  // namespace rnnlab
