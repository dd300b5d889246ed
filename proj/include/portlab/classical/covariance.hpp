#pragma once

#include <optional>
#include <string>
#include <vector>

#include "portlab/data/panel.hpp"
#include "portlab/numerics/linalg.hpp"

namespace portlab {

/// Daily return covariance with provenance tag
/// ("empirical" | "shrunk" | "autoencoder" | "gnn").
struct CovarianceEstimate {
    std::vector<std::string> tickers;
    Matrix sigma;
    std::string source;
};

struct ExpectedReturns {
    std::vector<std::string> tickers;
    Vector mu;  // daily simple returns
};

/// Diagonal-target shrinkage: (1-intensity) * sigma + intensity * diag(sigma).
inline CovarianceEstimate shrink_covariance(const CovarianceEstimate& emp, double intensity) {
    if (!(intensity >= 0.0) || !(intensity <= 1.0))
        throw ArgumentError("shrink_covariance: intensity must lie in [0,1]");
    CovarianceEstimate out = emp;
    if (intensity == 0.0) return out;
    const Matrix diag = emp.sigma.diagonal().asDiagonal();
    out.sigma = (1.0 - intensity) * emp.sigma + intensity * diag;
    out.source = "shrunk";
    return out;
}

/// Automatic intensity n/(n+T): heavier shrinkage when history is short
/// relative to the universe.
inline double auto_shrink_intensity(int assets, int observations) {
    return static_cast<double>(assets) / static_cast<double>(assets + observations);
}

/// Sample covariance (n-1 denominator) over the trailing window, or the full
/// history when no window is given. Short windows (fewer than n+1 rows) force
/// automatic shrinkage so the estimate stays usable.
inline CovarianceEstimate empirical_covariance(const ReturnPanel& rp,
                                               std::optional<int> window = std::nullopt) {
    int rows = rp.days();
    if (window) {
        if (*window < 2) throw ArgumentError("empirical_covariance: window must be >= 2");
        rows = std::min(rows, *window);
    }
    if (rows < 2) throw DataError("empirical_covariance: need at least 2 observations");

    const Matrix x = rp.returns.bottomRows(rows);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - mean;
    Matrix sigma = (centered.transpose() * centered) / static_cast<double>(rows - 1);
    sigma = 0.5 * (sigma + sigma.transpose());

    CovarianceEstimate est{rp.tickers, std::move(sigma), "empirical"};
    if (rows < rp.assets() + 1)
        est = shrink_covariance(est, auto_shrink_intensity(rp.assets(), rows));
    return est;
}

/// Covariance of one asset's returns with the market divided by market
/// variance (population moments; the ratio is denominator-convention free).
inline double beta(const Vector& asset, const Vector& market) {
    if (asset.size() != market.size() || asset.size() < 2)
        throw ArgumentError("beta: series must have equal length >= 2");
    const double am = asset.mean(), mm = market.mean();
    const double var_m = (market.array() - mm).square().sum();
    // scale-aware zero test: catches constant series up to rounding residue
    const double tiny = std::pow(1e-14 * (std::abs(mm) + 1.0), 2) * market.size();
    if (var_m <= tiny) throw NumericError("beta: market variance is zero");
    const double cov = ((asset.array() - am) * (market.array() - mm)).sum();
    return cov / var_m;
}

inline double capm_expected_return(double risk_free, double beta_coeff, double market_return) {
    return risk_free + beta_coeff * (market_return - risk_free);
}

}  // namespace portlab
