#pragma once

#include <optional>

#include "portlab/classical/covariance.hpp"
#include "portlab/numerics/linalg.hpp"

namespace portlab {

/// Portfolio weights on the capped simplex: sum 1, 0 <= w_i <= cap.
struct WeightVector {
    std::vector<std::string> tickers;
    Vector w;
};

enum class MvoMode { TargetReturn, MaxSharpe };

struct MvoConstraints {
    MvoMode mode = MvoMode::MaxSharpe;
    std::optional<double> target_daily;  // required in TargetReturn mode
    double rf_annual = 0.0;              // converted to daily by /252
    double cap = 1.0;
};

namespace detail {

/// Projection onto {0 <= w <= cap, sum w = 1, w.mu = p} via the 2-D dual:
/// w_i = clamp(v_i - tau - nu*mu_i, 0, cap). The inner threshold tau is set by
/// the budget; the outer multiplier nu drives w.mu, which is monotone
/// non-increasing in nu, so nested bisection converges.
inline Vector project_budget_and_return(const Vector& v, const Vector& mu, double p, double cap) {
    const auto n = v.size();
    auto clamp_sum = [&](double tau, double nu, Vector* out) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double wi = std::clamp(v[i] - tau - nu * mu[i], 0.0, cap);
            if (out) (*out)[i] = wi;
            s += wi;
        }
        return s;
    };
    auto solve_tau = [&](double nu) {
        double lo = (v - nu * mu).minCoeff() - cap - 1.0;
        double hi = (v - nu * mu).maxCoeff() + 1.0;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            (clamp_sum(mid, nu, nullptr) > 1.0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    auto achieved = [&](double nu, Vector* out) {
        const double tau = solve_tau(nu);
        Vector w(n);
        clamp_sum(tau, nu, &w);
        if (out) *out = w;
        return w.dot(mu);
    };

    const double mu_scale = std::max(1e-12, mu.cwiseAbs().maxCoeff());
    double lo = -1.0 / mu_scale, hi = 1.0 / mu_scale;
    for (int grow = 0; grow < 60 && achieved(lo, nullptr) < p; ++grow) lo *= 2.0;
    for (int grow = 0; grow < 60 && achieved(hi, nullptr) > p; ++grow) hi *= 2.0;
    if (achieved(lo, nullptr) < p || achieved(hi, nullptr) > p)
        throw ConstraintError("solve_mvo: target return infeasible under the weight cap");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (achieved(mid, nullptr) > p ? lo : hi) = mid;
    }
    Vector w(n);
    achieved(0.5 * (lo + hi), &w);
    return w;
}

/// Range of w.mu attainable on the capped simplex (greedy cap filling).
inline std::pair<double, double> achievable_return_range(const Vector& mu, double cap) {
    std::vector<int> order(static_cast<size_t>(mu.size()));
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    auto fill = [&](bool descending) {
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return descending ? mu[a] > mu[b] : mu[a] < mu[b];
        });
        double budget = 1.0, total = 0.0;
        for (const int i : order) {
            const double take = std::min(cap, budget);
            total += take * mu[i];
            budget -= take;
            if (budget <= 0) break;
        }
        return total;
    };
    return {fill(false), fill(true)};
}

}  // namespace detail

/// Markowitz solver on the long-only capped simplex.
///
/// TargetReturn: minimizes w' Sigma w subject to w.mu = p, sum w = 1, caps —
/// projected gradient with exact projection onto the constraint set.
/// MaxSharpe: maximizes (w.mu - rf_daily) / sqrt(w' Sigma w) by projected
/// gradient ascent (step 1e-2 on scale-normalized inputs, at most 5000
/// iterations, stop when the weight change falls below 1e-9), warm-started at
/// the closed-form tangency portfolio when that point is interior.
inline WeightVector solve_mvo(const ExpectedReturns& mu, const CovarianceEstimate& sigma,
                              const MvoConstraints& cons) {
    const auto n = mu.mu.size();
    if (sigma.sigma.rows() != n || sigma.sigma.cols() != n)
        throw ShapeError("solve_mvo: mu/sigma dimensions differ");
    if (!(cons.cap > 0.0) || cons.cap * static_cast<double>(n) < 1.0)
        throw ConstraintError("solve_mvo: cap infeasible");
    require_finite(mu.mu, "solve_mvo mu");

    const Matrix sig = nearest_psd(sigma.sigma, 1e-8);
    const double rf_daily = cons.rf_annual / 252.0;

    if (cons.mode == MvoMode::TargetReturn) {
        if (!cons.target_daily) throw ArgumentError("solve_mvo: target return not set");
        const double p = *cons.target_daily;
        if (p < mu.mu.minCoeff() - 1e-15 || p > mu.mu.maxCoeff() + 1e-15)
            throw ConstraintError("solve_mvo: target outside [min(mu), max(mu)]");
        const auto [lo, hi] = detail::achievable_return_range(mu.mu, cons.cap);
        if (p < lo - 1e-12 || p > hi + 1e-12)
            throw ConstraintError("solve_mvo: target return infeasible under the weight cap");

        const double scale = std::max(sig.diagonal().mean(), 1e-16);
        const Matrix s = sig / scale;
        Eigen::SelfAdjointEigenSolver<Matrix> es(s);
        const double step = 1.0 / std::max(2.0 * es.eigenvalues().maxCoeff(), 1e-8);
        Vector w = detail::project_budget_and_return(Vector::Constant(n, 1.0 / n), mu.mu, p,
                                                     cons.cap);
        for (int it = 0; it < 10000; ++it) {
            const Vector grad = 2.0 * (s * w);
            Vector next = detail::project_budget_and_return(w - step * grad, mu.mu, p, cons.cap);
            const double delta = (next - w).lpNorm<Eigen::Infinity>();
            w = next;
            if (delta < 1e-10) break;
        }
        return WeightVector{mu.tickers, w};
    }

    // MaxSharpe. Normalize Sigma by its mean variance and the excess-return
    // vector by its norm; both are monotone reparameterizations of the
    // objective, so the argmax is unchanged and the step size is scale-free.
    const Vector excess = mu.mu.array() - rf_daily;
    const double escale = excess.norm();
    if (escale < 1e-15) {
        // Flat objective; any feasible point attains Sharpe 0.
        return WeightVector{mu.tickers,
                            project_capped_simplex(Vector::Constant(n, 1.0 / n), cons.cap)};
    }
    const double sscale = std::max(sig.diagonal().mean(), 1e-16);
    const Matrix s = sig / sscale;
    const Vector e = excess / escale;

    Vector w = project_capped_simplex(Vector::Constant(n, 1.0 / n), cons.cap);
    Eigen::LDLT<Matrix> ldlt(s);
    if (ldlt.info() == Eigen::Success) {
        const Vector tangency = ldlt.solve(e);
        const double total = tangency.sum();
        if (total > 1e-12) {
            const Vector cand = tangency / total;
            if (cand.minCoeff() >= 0.0 && cand.maxCoeff() <= cons.cap) w = cand;
        }
    }

    const double step = 1e-2;
    for (int it = 0; it < 5000; ++it) {
        const Vector sw = s * w;
        const double var = w.dot(sw);
        const double vol = std::sqrt(std::max(var, 1e-18));
        const double ret = w.dot(e);
        const Vector grad = e / vol - (ret / (vol * vol * vol)) * sw;
        Vector next = project_capped_simplex(w + step * grad, cons.cap);
        const double delta = (next - w).lpNorm<Eigen::Infinity>();
        w = next;
        if (delta < 1e-9) break;
    }
    return WeightVector{mu.tickers, w};
}

inline double portfolio_sharpe(const Vector& w, const Vector& mu, const Matrix& sigma,
                               double rf_daily = 0.0) {
    const double var = w.dot(sigma * w);
    if (var <= 0.0) return 0.0;
    return (w.dot(mu) - rf_daily) / std::sqrt(var);
}

}  // namespace portlab
