#include <catch2/catch_amalgamated.hpp>

#include "portlab/classical/black_litterman.hpp"
#include "portlab/classical/covariance.hpp"
#include "portlab/classical/mvo.hpp"
#include "portlab/numerics/rng.hpp"

using namespace portlab;

namespace {

ReturnPanel panel_from(const Matrix& returns) {
    ReturnPanel rp;
    for (int i = 0; i < returns.cols(); ++i) rp.tickers.push_back("A" + std::to_string(i));
    Date d{2018, 1, 2};
    for (int t = 0; t < returns.rows(); ++t) {
        rp.dates.push_back(d);
        d = d.next_business_day();
    }
    rp.returns = returns;
    return rp;
}

Matrix random_cov(Pcg32& rng, int n, double vol_scale) {
    Matrix f(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) f(r, c) = rng.normal();
    Matrix s = (f * f.transpose()) / n;
    for (int i = 0; i < n; ++i) s(i, i) += 0.2;
    return s * vol_scale * vol_scale;
}

// Exhaustive grid over the 3-asset capped simplex with 0.01 resolution.
double best_grid_sharpe(const Vector& mu, const Matrix& sigma, double cap, double rf_daily) {
    double best = -1e18;
    for (int a = 0; a <= 100; ++a)
        for (int b = 0; a + b <= 100; ++b) {
            const int c = 100 - a - b;
            Vector w(3);
            w << a / 100.0, b / 100.0, c / 100.0;
            if (w.maxCoeff() > cap + 1e-12) continue;
            best = std::max(best, portfolio_sharpe(w, mu, sigma, rf_daily));
        }
    return best;
}

}  // namespace

TEST_CASE("empirical covariance") {
    SECTION("perfectly correlated pair") {
        const int T = 50;
        Matrix r(T, 2);
        Pcg32 rng(3);
        for (int t = 0; t < T; ++t) {
            const double x = 0.01 * rng.normal();
            r(t, 0) = x;
            r(t, 1) = 2.0 * x;
        }
        auto est = empirical_covariance(panel_from(r));
        const double s0 = std::sqrt(est.sigma(0, 0)), s1 = std::sqrt(est.sigma(1, 1));
        REQUIRE(est.sigma(0, 1) == Catch::Approx(s0 * s1).margin(1e-15));
        REQUIRE(est.source == "empirical");
    }
    SECTION("constant series gives the zero matrix") {
        Matrix r = Matrix::Constant(30, 2, 0.004);
        auto est = empirical_covariance(panel_from(r));
        REQUIRE(est.sigma.isZero(1e-18));
    }
    SECTION("windowed estimate matches an independent two-pass oracle") {
        Pcg32 rng(11);
        Matrix r(400, 4);
        for (int t = 0; t < 400; ++t)
            for (int i = 0; i < 4; ++i) r(t, i) = 0.01 * rng.normal();
        auto est = empirical_covariance(panel_from(r), 252);

        Matrix tail = r.bottomRows(252);
        Matrix oracle = Matrix::Zero(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double mi = 0, mj = 0;
                for (int t = 0; t < 252; ++t) {
                    mi += tail(t, i);
                    mj += tail(t, j);
                }
                mi /= 252;
                mj /= 252;
                double acc = 0;
                for (int t = 0; t < 252; ++t) acc += (tail(t, i) - mi) * (tail(t, j) - mj);
                oracle(i, j) = acc / 251;
            }
        REQUIRE((est.sigma - oracle).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
    SECTION("short history forces shrinkage") {
        Pcg32 rng(5);
        Matrix r(4, 6);
        for (int t = 0; t < 4; ++t)
            for (int i = 0; i < 6; ++i) r(t, i) = 0.01 * rng.normal();
        auto est = empirical_covariance(panel_from(r));
        REQUIRE(est.source == "shrunk");
    }
    SECTION("single row rejected") {
        REQUIRE_THROWS_AS(empirical_covariance(panel_from(Matrix::Zero(1, 2))), DataError);
    }
}

TEST_CASE("shrinkage") {
    CovarianceEstimate emp;
    emp.tickers = {"a", "b"};
    emp.sigma.resize(2, 2);
    emp.sigma << 1.0, 0.8, 0.8, 1.0;
    emp.source = "empirical";

    SECTION("intensity 0 is the identity map") {
        auto out = shrink_covariance(emp, 0.0);
        REQUIRE(out.sigma == emp.sigma);
        REQUIRE(out.source == "empirical");
    }
    SECTION("intensity 1 keeps only the diagonal") {
        auto out = shrink_covariance(emp, 1.0);
        REQUIRE(out.sigma(0, 1) == 0.0);
        REQUIRE(out.sigma(0, 0) == 1.0);
    }
    SECTION("intensity 0.5 halves off-diagonals") {
        auto out = shrink_covariance(emp, 0.5);
        REQUIRE(out.sigma(0, 1) == Catch::Approx(0.4).margin(1e-15));
        REQUIRE(out.sigma(0, 0) == 1.0);
        REQUIRE(out.source == "shrunk");
    }
    SECTION("intensity outside [0,1] rejected") {
        REQUIRE_THROWS_AS(shrink_covariance(emp, -0.1), ArgumentError);
        REQUIRE_THROWS_AS(shrink_covariance(emp, 1.1), ArgumentError);
    }
}

TEST_CASE("beta and CAPM") {
    Pcg32 rng(9);
    Vector m(100);
    for (int t = 0; t < 100; ++t) m[t] = 0.01 * rng.normal();

    REQUIRE(beta(m, m) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(beta(Vector::Constant(100, 0.002), m) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(beta((2.0 * m).eval(), m) == Catch::Approx(2.0).margin(1e-12));
    REQUIRE_THROWS_AS(beta(m, Vector::Constant(100, 0.001)), NumericError);

    REQUIRE(capm_expected_return(0.03, 0.0, 0.08) == 0.03);
    REQUIRE(capm_expected_return(0.03, 1.0, 0.08) == Catch::Approx(0.08).margin(1e-15));
    REQUIRE(capm_expected_return(0.02, 1.5, 0.08) == Catch::Approx(0.11).margin(1e-15));
}

TEST_CASE("solve_mvo symmetry and modes") {
    ExpectedReturns mu{{"a", "b"}, Vector::Constant(2, 0.0005)};
    CovarianceEstimate sig{{"a", "b"}, 1e-4 * Matrix::Identity(2, 2), "empirical"};

    SECTION("two symmetric assets split evenly in both modes") {
        MvoConstraints ms{MvoMode::MaxSharpe, std::nullopt, 0.0, 1.0};
        Vector w1 = solve_mvo(mu, sig, ms).w;
        REQUIRE(w1[0] == Catch::Approx(0.5).margin(1e-6));

        MvoConstraints tr{MvoMode::TargetReturn, 0.0005, 0.0, 1.0};
        Vector w2 = solve_mvo(mu, sig, tr).w;
        REQUIRE(w2[0] == Catch::Approx(0.5).margin(1e-6));
    }
    SECTION("interior tangency matches the closed form") {
        Pcg32 rng(21);
        ExpectedReturns mu3{{"a", "b", "c"}, Vector(3)};
        mu3.mu << 8e-4, 6e-4, 5e-4;
        Matrix s = random_cov(rng, 3, 0.01);
        CovarianceEstimate est{mu3.tickers, s, "empirical"};
        const Vector tangency = s.ldlt().solve(mu3.mu);
        if (tangency.minCoeff() > 0) {
            const Vector expect = tangency / tangency.sum();
            MvoConstraints cons{MvoMode::MaxSharpe, std::nullopt, 0.0, 1.0};
            Vector w = solve_mvo(mu3, est, cons).w;
            REQUIRE((w - expect).lpNorm<Eigen::Infinity>() < 1e-5);
        }
    }
    SECTION("target-return mode hits the target and stays feasible") {
        Pcg32 rng(31);
        for (int trial = 0; trial < 10; ++trial) {
            ExpectedReturns mu3{{"a", "b", "c"}, Vector(3)};
            for (int i = 0; i < 3; ++i) mu3.mu[i] = 1e-3 * rng.uniform(-0.5, 1.0);
            CovarianceEstimate est{mu3.tickers, random_cov(rng, 3, 0.01), "empirical"};
            const double p = 0.5 * (mu3.mu.minCoeff() + mu3.mu.maxCoeff());
            MvoConstraints cons{MvoMode::TargetReturn, p, 0.0, 0.6};
            Vector w = solve_mvo(mu3, est, cons).w;
            REQUIRE(std::abs(w.dot(mu3.mu) - p) < 1e-6);
            REQUIRE(std::abs(w.sum() - 1.0) < 1e-9);
            REQUIRE(w.minCoeff() >= -1e-12);
            REQUIRE(w.maxCoeff() <= 0.6 + 1e-9);
        }
    }
    SECTION("infeasible target rejected") {
        ExpectedReturns mu3{{"a", "b"}, Vector(2)};
        mu3.mu << 1e-3, 2e-3;
        CovarianceEstimate est{mu3.tickers, 1e-4 * Matrix::Identity(2, 2), "empirical"};
        MvoConstraints cons{MvoMode::TargetReturn, 5e-3, 0.0, 1.0};
        REQUIRE_THROWS_AS(solve_mvo(mu3, est, cons), ConstraintError);
        // feasible in mu-range but not under the cap
        MvoConstraints capped{MvoMode::TargetReturn, 1.9e-3, 0.0, 0.5};
        REQUIRE_THROWS_AS(solve_mvo(mu3, est, capped), ConstraintError);
    }
    SECTION("solver beats the 0.01 grid within 1e-3 on random instances") {
        Pcg32 rng(77);
        for (int trial = 0; trial < 10; ++trial) {
            ExpectedReturns mu3{{"a", "b", "c"}, Vector(3)};
            for (int i = 0; i < 3; ++i) mu3.mu[i] = 1e-3 * rng.uniform(-1.0, 2.0);
            Matrix s = random_cov(rng, 3, 0.01);
            CovarianceEstimate est{mu3.tickers, s, "empirical"};
            MvoConstraints cons{MvoMode::MaxSharpe, std::nullopt, 0.0, 0.6};
            Vector w = solve_mvo(mu3, est, cons).w;
            const double got = portfolio_sharpe(w, mu3.mu, nearest_psd(s, 1e-8), 0.0);
            const double grid = best_grid_sharpe(mu3.mu, nearest_psd(s, 1e-8), 0.6, 0.0);
            REQUIRE(got >= grid - 1e-3);
        }
    }
    SECTION("max-sharpe weights are invariant to covariance scale") {
        Pcg32 rng(13);
        ExpectedReturns mu3{{"a", "b", "c"}, Vector(3)};
        mu3.mu << 9e-4, 4e-4, 6e-4;
        Matrix s = random_cov(rng, 3, 0.01);
        MvoConstraints cons{MvoMode::MaxSharpe, std::nullopt, 0.0, 0.6};
        Vector w1 = solve_mvo(mu3, {mu3.tickers, s, "e"}, cons).w;
        Vector w2 = solve_mvo(mu3, {mu3.tickers, (25.0 * s).eval(), "e"}, cons).w;
        REQUIRE((w1 - w2).lpNorm<Eigen::Infinity>() < 1e-6);
    }
    SECTION("weight constraints hold exactly after projection") {
        Pcg32 rng(19);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 2 + static_cast<int>(rng.uniform_int(5));
            ExpectedReturns m{{}, Vector(n)};
            for (int i = 0; i < n; ++i) {
                m.tickers.push_back("x" + std::to_string(i));
                m.mu[i] = 1e-3 * rng.normal();
            }
            const double cap = std::max(1.0 / n + 0.05, rng.uniform(0.3, 1.0));
            CovarianceEstimate est{m.tickers, random_cov(rng, n, 0.01), "e"};
            MvoConstraints cons{MvoMode::MaxSharpe, std::nullopt, 0.0, cap};
            Vector w = solve_mvo(m, est, cons).w;
            REQUIRE(std::abs(w.sum() - 1.0) <= 1e-9);
            REQUIRE(w.minCoeff() >= -1e-12);
            REQUIRE(w.maxCoeff() <= cap + 1e-12);
        }
    }
}

TEST_CASE("black-litterman") {
    CovarianceEstimate sigma{{"a", "b", "c"}, Matrix(3, 3), "empirical"};
    sigma.sigma << 2.5e-4, 1.0e-4, 0.5e-4,
                   1.0e-4, 3.0e-4, 0.8e-4,
                   0.5e-4, 0.8e-4, 1.5e-4;

    SECTION("implied returns, identity covariance sanity") {
        MarketViews v;
        v.delta = 1.0;
        v.w_mkt = Vector::Constant(3, 1.0 / 3.0);
        CovarianceEstimate eye{{"a", "b", "c"}, Matrix::Identity(3, 3), "e"};
        Vector pi = bl_implied_returns(v, eye).mu;
        for (int i = 0; i < 3; ++i) REQUIRE(pi[i] == Catch::Approx(1.0 / 3.0).margin(1e-15));

        v.delta = 0.0;
        REQUIRE(bl_implied_returns(v, eye).mu.isZero());
    }
    SECTION("implied returns match a direct matrix-vector oracle") {
        MarketViews v;
        v.delta = 2.5;
        v.w_mkt.resize(3);
        v.w_mkt << 0.5, 0.3, 0.2;
        Vector pi = bl_implied_returns(v, sigma).mu;
        Vector oracle = 2.5 * sigma.sigma * v.w_mkt;
        REQUIRE((pi - oracle).lpNorm<Eigen::Infinity>() == 0.0);
    }
    SECTION("zero views return the prior exactly") {
        MarketViews v;
        v.w_mkt = Vector::Constant(3, 1.0 / 3.0);
        ExpectedReturns pi{{"a", "b", "c"}, Vector(3)};
        pi.mu << 1e-3, 2e-3, 3e-3;
        ExpectedReturns post = bl_posterior_returns(v, sigma, pi);
        REQUIRE(post.mu == pi.mu);
    }
    SECTION("huge confidence entry pins the posterior to the prior") {
        MarketViews v;
        v.w_mkt = Vector::Constant(3, 1.0 / 3.0);
        v.pick = Matrix::Zero(1, 3);
        v.pick(0, 0) = 1.0;
        v.view_returns = Vector::Constant(1, 0.01);
        v.omega_diag = Vector::Constant(1, 1e12);
        v.tau = 0.05;
        ExpectedReturns pi{{"a", "b", "c"}, Vector(3)};
        pi.mu << 1e-3, 2e-3, 3e-3;
        ExpectedReturns post = bl_posterior_returns(v, sigma, pi);
        REQUIRE((post.mu - pi.mu).lpNorm<Eigen::Infinity>() < 1e-6);
    }
    SECTION("single relative view matches an independent dense solve") {
        MarketViews v;
        v.w_mkt = Vector::Constant(3, 1.0 / 3.0);
        v.pick = Matrix::Zero(1, 3);
        v.pick(0, 0) = 1.0;
        v.pick(0, 1) = -1.0;  // a outperforms b
        v.view_returns = Vector::Constant(1, 5e-4);
        v.omega_diag = Vector::Constant(1, 2e-5);
        v.tau = 0.05;
        ExpectedReturns pi{{"a", "b", "c"}, Vector(3)};
        pi.mu << 1e-3, 1.2e-3, 0.8e-3;

        ExpectedReturns post = bl_posterior_returns(v, sigma, pi);

        // Oracle: assemble and solve the dense system directly.
        const Matrix ts_inv = (v.tau * sigma.sigma).inverse();
        const Matrix omega_inv = v.omega_diag.cwiseInverse().asDiagonal();
        const Matrix lhs = ts_inv + v.pick.transpose() * omega_inv * v.pick;
        const Vector rhs = ts_inv * pi.mu + v.pick.transpose() * omega_inv * v.view_returns;
        const Vector oracle = lhs.colPivHouseholderQr().solve(rhs);
        REQUIRE((post.mu - oracle).lpNorm<Eigen::Infinity>() < 1e-10);
    }
    SECTION("posterior lies between prior and view for diagonal sigma, P=I") {
        CovarianceEstimate diag{{"a", "b"}, (1e-4 * Matrix::Identity(2, 2)).eval(), "e"};
        MarketViews v;
        v.w_mkt = Vector::Constant(2, 0.5);
        v.pick = Matrix::Identity(2, 2);
        v.view_returns.resize(2);
        v.view_returns << 4e-3, -1e-3;
        v.tau = 0.1;
        v.omega_diag = (v.tau * diag.sigma).diagonal();
        ExpectedReturns pi{{"a", "b"}, Vector(2)};
        pi.mu << 1e-3, 1e-3;
        ExpectedReturns post = bl_posterior_returns(v, diag, pi);
        for (int i = 0; i < 2; ++i) {
            const double lo = std::min(pi.mu[i], v.view_returns[i]);
            const double hi = std::max(pi.mu[i], v.view_returns[i]);
            REQUIRE(post.mu[i] >= lo - 1e-15);
            REQUIRE(post.mu[i] <= hi + 1e-15);
            // Omega = tau*Sigma means an exact average of prior and view.
            REQUIRE(post.mu[i] ==
                    Catch::Approx(0.5 * (pi.mu[i] + v.view_returns[i])).margin(1e-12));
        }
    }
    SECTION("invalid inputs rejected") {
        MarketViews v;
        v.w_mkt = Vector::Constant(3, 1.0 / 3.0);
        v.pick = Matrix::Identity(3, 3);
        v.view_returns = Vector::Zero(3);
        v.omega_diag = Vector::Zero(3);  // not positive
        ExpectedReturns pi{{"a", "b", "c"}, Vector::Zero(3)};
        REQUIRE_THROWS_AS(bl_posterior_returns(v, sigma, pi), ArgumentError);
        MarketViews bad;
        bad.delta = 1.0;
        bad.w_mkt = Vector::Constant(3, 0.5);  // sums to 1.5
        REQUIRE_THROWS_AS(bl_implied_returns(bad, sigma), ArgumentError);
    }
}
