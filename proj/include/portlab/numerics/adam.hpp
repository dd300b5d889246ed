#pragma once

#include <cmath>

#include "portlab/numerics/linalg.hpp"

namespace portlab {

/// First/second moment accumulators for one flat parameter vector.
struct AdamState {
    Vector m;
    Vector v;
    long step = 0;
};

/// One bias-corrected Adam update, in place. Deterministic.
inline void adam_step(Vector& params, const Vector& grads, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: params/grads size mismatch");
    if (!(lr > 0.0)) throw ArgumentError("adam_step: lr must be positive");
    if (!grads.allFinite()) throw NumericError("adam_step: non-finite gradient");

    if (state.step == 0) {
        state.m = Vector::Zero(params.size());
        state.v = Vector::Zero(params.size());
    }
    state.step += 1;
    state.m = beta1 * state.m + (1.0 - beta1) * grads;
    state.v = beta2 * state.v + (1.0 - beta2) * grads.cwiseProduct(grads);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    params.array() -=
        lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

}  // namespace portlab
