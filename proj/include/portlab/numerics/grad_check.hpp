#pragma once

#include <functional>

#include "portlab/numerics/tape.hpp"

namespace portlab {

/// Scalar function of a flat parameter vector, expressed on a tape.
/// The parameter var is a 1 x P row; the result must be 1 x 1.
using TapedScalarFn = std::function<ad::Var(ad::Tape&, ad::Var)>;

inline double eval_scalar(const TapedScalarFn& f, const Vector& params) {
    ad::Tape tape;
    ad::Var p = tape.param(params.transpose());
    ad::Var out = f(tape, p);
    return tape.value(out)(0, 0);
}

/// Max over parameters of |analytic - central difference| / max(1, |central|).
inline double grad_check(const TapedScalarFn& f, const Vector& params, double eps = 1e-6) {
    if (!(eps > 0.0) || eps > 1e-3) throw ArgumentError("grad_check: eps must be in (0, 1e-3]");

    ad::Tape tape;
    ad::Var p = tape.param(params.transpose());
    ad::Var out = f(tape, p);
    tape.backward(out);
    const Matrix analytic = tape.grad(p);
    if (!analytic.allFinite()) throw NumericError("grad_check: non-finite analytic gradient");

    double worst = 0.0;
    Vector probe = params;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        probe[i] = params[i] + eps;
        const double fp = eval_scalar(f, probe);
        probe[i] = params[i] - eps;
        const double fm = eval_scalar(f, probe);
        probe[i] = params[i];
        const double numeric = (fp - fm) / (2.0 * eps);
        if (!std::isfinite(numeric)) throw NumericError("grad_check: non-finite finite-difference");
        const double err =
            std::abs(analytic(0, i) - numeric) / std::max(1.0, std::abs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

/// Splits one flat 1 x P parameter row into reshaped matrix views.
/// Shapes are (rows, cols) pairs; order defines the documented packing order.
inline std::vector<ad::Var> unpack_params(ad::Tape& tape, ad::Var flat,
                                          const std::vector<std::pair<int, int>>& shapes) {
    std::vector<ad::Var> out;
    out.reserve(shapes.size());
    int at = 0;
    for (const auto& [r, c] : shapes) {
        ad::Var s = ad::slice_cols(flat, at, r * c);
        out.push_back(ad::reshape(s, r, c));
        at += r * c;
    }
    if (at != tape.value(flat).cols()) throw ShapeError("unpack_params: size mismatch");
    return out;
}

}  // namespace portlab
