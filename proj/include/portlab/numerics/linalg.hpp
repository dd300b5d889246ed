#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "portlab/errors.hpp"

namespace portlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite entries");
}

/// Dense product with explicit shape checking.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    Matrix c = a * b;
    require_finite(c, "matmul");
    return c;
}

/// Numerically stable softmax (max-subtracted). Output sums to 1.
inline Vector softmax(const Vector& v) {
    if (v.size() == 0) throw ArgumentError("softmax: empty vector");
    require_finite(v, "softmax");
    const double m = v.maxCoeff();
    Vector e = (v.array() - m).exp().matrix();
    return e / e.sum();
}

/// Euclidean projection onto {w : sum(w) = 1, 0 <= w_i <= cap}.
///
/// Solves for the threshold tau with clamp(v_i - tau, 0, cap) summing to 1 by
/// scanning the sorted breakpoints of the piecewise-linear sum. Returns the
/// input unchanged when it is already feasible.
inline Vector project_capped_simplex(const Vector& v, double cap) {
    const auto n = v.size();
    if (n == 0) throw ArgumentError("project_capped_simplex: empty vector");
    require_finite(v, "project_capped_simplex");
    if (!(cap > 0.0) || cap * static_cast<double>(n) < 1.0)
        throw ConstraintError("project_capped_simplex: cap " + std::to_string(cap) +
                              " infeasible for n=" + std::to_string(n));

    // Fixed point: feasible inputs pass through bit-identically.
    if (std::abs(v.sum() - 1.0) <= 1e-12 && v.minCoeff() >= 0.0 && v.maxCoeff() <= cap) return v;

    auto mass = [&](double tau) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += std::clamp(v[i] - tau, 0.0, cap);
        return s;
    };

    // Breakpoints where a coordinate enters/leaves its clamp region.
    std::vector<double> bp;
    bp.reserve(static_cast<size_t>(2 * n));
    for (Eigen::Index i = 0; i < n; ++i) {
        bp.push_back(v[i]);
        bp.push_back(v[i] - cap);
    }
    std::sort(bp.begin(), bp.end());

    double tau = bp.front() - 1.0;  // mass here is n*cap >= 1
    for (size_t s = 0; s + 1 <= bp.size(); ++s) {
        const double lo = (s == 0) ? bp.front() - 1.0 : bp[s - 1];
        const double hi = bp[s];
        if (mass(hi) > 1.0) continue;  // crossing is further right
        // Crossing lies in [lo, hi]; the active/capped sets are fixed at the midpoint.
        const double mid = 0.5 * (lo + hi);
        double cap_mass = 0.0, active_sum = 0.0;
        int active = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double x = v[i] - mid;
            if (x >= cap)
                cap_mass += cap;
            else if (x > 0.0) {
                active_sum += v[i];
                ++active;
            }
        }
        if (active == 0) {
            tau = lo;  // flat segment already at mass 1
        } else {
            tau = (active_sum + cap_mass - 1.0) / static_cast<double>(active);
        }
        break;
    }

    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = std::clamp(v[i] - tau, 0.0, cap);
    // Absorb residual rounding into the interior coordinates.
    double resid = 1.0 - w.sum();
    if (resid != 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (w[i] > 0.0 && w[i] < cap) {
                w[i] = std::clamp(w[i] + resid, 0.0, cap);
                break;
            }
        }
    }
    return w;
}

/// Symmetric eigenvalue clip: smallest eigenvalue raised to `floor`.
/// Input already satisfying the floor is returned unchanged.
inline Matrix nearest_psd(const Matrix& s, double floor = 1e-8) {
    if (s.rows() != s.cols()) throw ShapeError("nearest_psd: matrix not square");
    require_finite(s, "nearest_psd");
    const Matrix sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success) throw NumericError("nearest_psd: eigendecomposition failed");
    if (es.eigenvalues().minCoeff() >= floor) return s;
    Vector clipped = es.eigenvalues().cwiseMax(floor);
    Matrix out = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

/// Smallest eigenvalue of the symmetric part.
inline double min_eigenvalue(const Matrix& s) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
    return es.eigenvalues().minCoeff();
}

}  // namespace portlab
