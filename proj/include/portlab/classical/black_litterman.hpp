#pragma once

#include "portlab/classical/covariance.hpp"
#include "portlab/numerics/linalg.hpp"

namespace portlab {

/// Investor views: P w-space pick matrix (v x n), Q view returns, diagonal
/// confidence Omega, prior-uncertainty tau, risk aversion delta, and the
/// market-cap weight vector the prior is implied from.
struct MarketViews {
    Matrix pick;        // v x n
    Vector view_returns;  // v
    Vector omega_diag;    // v, entries > 0
    double tau = 0.05;
    double delta = 2.5;
    Vector w_mkt;

    int view_count() const { return static_cast<int>(view_returns.size()); }
};

/// Equilibrium prior: Pi = delta * Sigma * w_mkt.
inline ExpectedReturns bl_implied_returns(const MarketViews& views,
                                          const CovarianceEstimate& sigma) {
    if (views.w_mkt.size() != sigma.sigma.rows())
        throw ShapeError("bl_implied_returns: w_mkt dimension mismatch");
    if (std::abs(views.w_mkt.sum() - 1.0) > 1e-9 || views.w_mkt.minCoeff() < -1e-12)
        throw ArgumentError("bl_implied_returns: w_mkt must lie on the simplex");
    return ExpectedReturns{sigma.tickers, views.delta * (sigma.sigma * views.w_mkt)};
}

/// Posterior mean:
///   E(R) = [(tau Sigma)^-1 + P' Omega^-1 P]^-1 [(tau Sigma)^-1 Pi + P' Omega^-1 Q]
/// With no views the posterior is the prior, returned exactly.
inline ExpectedReturns bl_posterior_returns(const MarketViews& views,
                                            const CovarianceEstimate& sigma,
                                            const ExpectedReturns& pi) {
    const auto n = sigma.sigma.rows();
    if (pi.mu.size() != n) throw ShapeError("bl_posterior_returns: pi dimension mismatch");
    if (views.view_count() == 0) return pi;
    if (views.pick.rows() != views.view_count() || views.pick.cols() != n)
        throw ShapeError("bl_posterior_returns: pick matrix must be views x assets");
    if (views.omega_diag.size() != views.view_count() || views.omega_diag.minCoeff() <= 0.0)
        throw ArgumentError("bl_posterior_returns: Omega diagonal must be positive");
    if (!(views.tau > 0.0)) throw ArgumentError("bl_posterior_returns: tau must be positive");

    const Matrix tau_sigma = views.tau * nearest_psd(sigma.sigma, 1e-8);
    Eigen::LDLT<Matrix> prior(tau_sigma);
    if (prior.info() != Eigen::Success)
        throw NumericError("bl_posterior_returns: tau*Sigma not factorizable");
    const Matrix prior_inv = prior.solve(Matrix::Identity(n, n));

    const Vector omega_inv = views.omega_diag.cwiseInverse();
    const Matrix pt_om_p =
        views.pick.transpose() * omega_inv.asDiagonal() * views.pick;
    const Matrix lhs = prior_inv + pt_om_p;
    const Vector rhs = prior_inv * pi.mu +
                       views.pick.transpose() * (omega_inv.asDiagonal() * views.view_returns);

    Eigen::LDLT<Matrix> solver(lhs);
    Vector posterior = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !posterior.allFinite())
        throw NumericError("bl_posterior_returns: composite matrix singular");
    return ExpectedReturns{pi.tickers, std::move(posterior)};
}

}  // namespace portlab
