#pragma once

#include "lgs/core.hpp"

namespace lgs {

// Exponential learning-rate schedule: lr(t) = init * (final/init)^(min(t,T)/T).
// Groups with init == final are constant.
struct ScheduleSpec {
    double lr_init = 1e-3;
    double lr_final = 1e-3;
    long horizon = 1;

    void validate() const {
        if (!(lr_final > 0.0) || !(lr_init >= lr_final))
            throw InvalidConfig("schedule requires lr_init >= lr_final > 0");
        if (horizon < 1) throw InvalidConfig("schedule horizon must be >= 1");
    }

    static ScheduleSpec constant(double lr) { return {lr, lr, 1}; }
};

inline double lr_at(const ScheduleSpec& spec, long t) {
    spec.validate();
    if (t < 0) throw InvalidConfig("schedule step must be nonnegative");
    if (spec.lr_init == spec.lr_final) return spec.lr_init;
    const double frac = double(std::min(t, spec.horizon)) / double(spec.horizon);
    return spec.lr_init * std::pow(spec.lr_final / spec.lr_init, frac);
}

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

// One parameter group's moment buffers. Shapes mirror the flattened group.
struct AdamGroupState {
    VecX m;
    VecX v;
    long step = 0;

    void ensure_size(Eigen::Index n) {
        if (m.size() != n) {
            m = VecX::Zero(n);
            v = VecX::Zero(n);
        }
    }
};

// Standard bias-corrected Adam update, in place on a flattened group.
inline void adam_step_group(VecX& params, const VecX& grads, AdamGroupState& state, double lr,
                            const AdamParams& hp, const std::string& group_name) {
    if (params.size() != grads.size())
        throw DimensionMismatch("adam: gradient shape mismatch in group " + group_name);
    if (!grads.allFinite())
        throw NumericalFailure("adam: non-finite gradient in group " + group_name);
    state.ensure_size(params.size());
    ++state.step;
    const double c1 = 1.0 - std::pow(hp.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(hp.beta2, double(state.step));
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * grads[i];
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + hp.eps);
    }
}

}  // namespace lgs
