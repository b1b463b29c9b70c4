#pragma once

// Adam optimizer over the three parameter blocks, with bias correction.

#include <cmath>

#include "gradients.hpp"
#include "rnn.hpp"

namespace rnnlab {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Gradients m;  // first-moment estimates
    Gradients v;  // second-moment estimates
    long step = 0;

    AdamState() = default;
    explicit AdamState(const RnnParams& p) : m(p), v(p) {}
};

namespace detail {

inline void adam_block(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v,
                       const AdamConfig& cfg, double bc1, double bc2) {
    require(param.same_shape(grad) && param.same_shape(m) && param.same_shape(v),
            "adam_block: shape mismatch");
    const size_t count = param.data.size();
    for (size_t i = 0; i < count; ++i) {
        const double g = grad.data[i];
        m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
        v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m.data[i] / bc1;
        const double vhat = v.data[i] / bc2;
        param.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace detail

inline void adam_update(RnnParams& p, const Gradients& g, AdamState& st, const AdamConfig& cfg) {
    st.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    detail::adam_block(p.w_h, g.w_h, st.m.w_h, st.v.w_h, cfg, bc1, bc2);
    detail::adam_block(p.w_x, g.w_x, st.m.w_x, st.v.w_x, cfg, bc1, bc2);
    detail::adam_block(p.w_out, g.w_out, st.m.w_out, st.v.w_out, cfg, bc1, bc2);
}

}  // namespace rnnlab
