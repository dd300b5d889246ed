#pragma once

// Deterministic synthetic market generators shared across test suites.

#include "portlab/data/panel.hpp"
#include "portlab/numerics/rng.hpp"

namespace portlab::testsupport {

inline std::vector<Date> business_days(Date start, int count) {
    std::vector<Date> out;
    Date d = start;
    while (d.weekday() >= 5) d = d.next_day();
    out.push_back(d);
    while (static_cast<int>(out.size()) < count) {
        d = d.next_business_day();
        out.push_back(d);
    }
    return out;
}

inline ReturnPanel return_panel(const Matrix& returns, Date start = Date{2016, 1, 4}) {
    ReturnPanel rp;
    for (int i = 0; i < returns.cols(); ++i) rp.tickers.push_back("A" + std::to_string(i));
    rp.dates = business_days(start, static_cast<int>(returns.rows()));
    rp.returns = returns;
    return rp;
}

/// Geometric random walk prices with mild factor structure.
inline PricePanel random_walk_panel(int days, int assets, std::uint64_t seed,
                                    double daily_vol = 0.01) {
    Pcg32 rng(seed);
    PricePanel p;
    for (int i = 0; i < assets; ++i) p.tickers.push_back("A" + std::to_string(i));
    p.dates = business_days(Date{2015, 1, 2}, days);
    p.prices.resize(days, assets);
    for (int i = 0; i < assets; ++i) p.prices(0, i) = 50.0 + 10.0 * i;
    for (int t = 1; t < days; ++t) {
        const double market = rng.normal();
        for (int i = 0; i < assets; ++i) {
            const double shock = 0.5 * market + 0.8 * rng.normal();
            p.prices(t, i) = p.prices(t - 1, i) * (1.0 + daily_vol * shock);
        }
    }
    return p;
}

/// Returns that are an exact rank-k factor mixture (plus nothing else).
inline ReturnPanel rank_k_returns(int days, int assets, int k, std::uint64_t seed) {
    Pcg32 rng(seed);
    Matrix factors(days, k);
    for (int t = 0; t < days; ++t)
        for (int j = 0; j < k; ++j) factors(t, j) = 0.01 * rng.normal();
    Matrix loadings(k, assets);
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < assets; ++i) loadings(j, i) = rng.uniform(-1.0, 1.0);
    return return_panel(factors * loadings);
}

/// Two blocks: within-block correlation high, across blocks none.
inline ReturnPanel two_block_returns(int days, int block_size, std::uint64_t seed,
                                     double within_corr = 0.9) {
    Pcg32 rng(seed);
    const int n = 2 * block_size;
    Matrix r(days, n);
    const double shared = std::sqrt(within_corr);
    const double idio = std::sqrt(1.0 - within_corr);
    for (int t = 0; t < days; ++t) {
        const double f0 = rng.normal(), f1 = rng.normal();
        for (int i = 0; i < n; ++i) {
            const double f = i < block_size ? f0 : f1;
            r(t, i) = 0.01 * (shared * f + idio * rng.normal());
        }
    }
    return return_panel(r);
}

/// Noise-free AR(1) recursion x_{t+1} = phi * x_t + s_t driven by a
/// deterministic periodic impulse pattern, so the next value is an exact
/// function of the trailing window while the variance never decays away.
inline ReturnPanel ar1_forced_returns(int days, int assets, double phi = 0.9, int period = 7) {
    Matrix r(days, assets);
    for (int i = 0; i < assets; ++i) {
        double x = 0.01 * (1 + i);
        for (int t = 0; t < days; ++t) {
            r(t, i) = x;
            const double impulse =
                ((t + 2 * i) % period == 0) ? 0.01 * ((i % 2 == 0) ? 1.0 : -1.0) : 0.0;
            x = phi * x + impulse;
        }
    }
    return return_panel(r);
}

}  // namespace portlab::testsupport
