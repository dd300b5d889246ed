#pragma once

#include <optional>
#include <string>
#include <vector>

#include "portlab/strategies.hpp"

namespace portlab {

// ---------------------------------------------------------------------------
// performance metrics
// ---------------------------------------------------------------------------

inline constexpr int kTradingDaysPerYear = 252;

/// One-way turnover: sum of absolute weight changes, in [0, 2].
inline double turnover(const WeightVector& prev, const WeightVector& next) {
    if (prev.tickers != next.tickers) throw ArgumentError("turnover: ticker sets differ");
    return (next.w - prev.w).lpNorm<1>();
}

/// Product of (1 + R_t) minus one.
inline double cumulative_return(const std::vector<double>& returns) {
    double acc = 1.0;
    for (const double r : returns) {
        if (r <= -1.0) throw NumericError("cumulative_return: return at or below -100%");
        acc *= 1.0 + r;
    }
    return acc - 1.0;
}

/// (1 + CR)^(252 / num_days) - 1.
inline double annualized_return(double cumulative, int num_days) {
    if (num_days < 1) throw ArgumentError("annualized_return: need at least one day");
    if (cumulative <= -1.0) throw NumericError("annualized_return: CR at or below -100%");
    return std::pow(1.0 + cumulative, static_cast<double>(kTradingDaysPerYear) / num_days) - 1.0;
}

/// Sample standard deviation (n-1) scaled by sqrt(252).
inline double annualized_volatility(const std::vector<double>& returns) {
    const auto n = static_cast<Eigen::Index>(returns.size());
    if (n < 2) throw ArgumentError("annualized_volatility: need at least 2 returns");
    const Eigen::Map<const Vector> r(returns.data(), n);
    const double mean = r.mean();
    const double sd = std::sqrt((r.array() - mean).square().sum() / (n - 1));
    return sd * std::sqrt(static_cast<double>(kTradingDaysPerYear));
}

/// (AR - R_f) / AV; degenerate volatility reports as null, not an error.
inline std::optional<double> sharpe_ratio(double annual_return, double rf_annual,
                                          double annual_vol) {
    if (annual_vol < 1e-12) return std::nullopt;
    return (annual_return - rf_annual) / annual_vol;
}

/// Largest peak-to-trough decline, one pass over a running peak.
/// Returned as a nonnegative magnitude; reports render it with a minus sign.
inline double max_drawdown(const std::vector<double>& values) {
    if (values.empty()) throw ArgumentError("max_drawdown: empty series");
    double peak = values.front();
    double worst = 0.0;
    for (const double v : values) {
        if (!(v > 0.0)) throw ArgumentError("max_drawdown: values must be positive");
        peak = std::max(peak, v);
        worst = std::max(worst, (peak - v) / peak);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// simulation
// ---------------------------------------------------------------------------

struct BacktestConfig {
    Date test_start;             // first test day (rebalances anchor here)
    int rebalance_interval = 21;  // trading days
    double cost_rate = 0.001;    // 10 bps per unit one-way turnover
    double initial_value = 1.0;
    StrategyConfig strategy;
    double max_vol_annual = 0.0;  // monitors; 0 disables
    double max_drawdown_limit = 0.0;
};

struct MetricsRecord {
    double cumulative_return = 0.0;
    double annualized_return = 0.0;
    double annualized_volatility = 0.0;
    std::optional<double> sharpe;
    double max_drawdown = 0.0;  // magnitude
    double total_turnover = 0.0;
};

struct BacktestResult {
    std::string strategy;
    std::vector<Date> dates;      // one entry per test day
    std::vector<double> returns;  // net daily returns
    std::vector<double> values;   // compounded path
    Matrix daily_weights;         // start-of-day weights, drifted between rebalances
    std::vector<std::pair<Date, Vector>> rebalance_weights;
    MetricsRecord metrics;
    std::vector<std::string> tickers;
    bool vol_breach = false;
    bool drawdown_breach = false;
    // config echo
    int rebalance_interval = 0;
    double cost_rate = 0.0;
    double initial_value = 1.0;
    double rf_annual = 0.0;
};

inline MetricsRecord compute_metrics(const std::vector<double>& returns,
                                     const std::vector<double>& values, double rf_annual,
                                     double total_turn) {
    MetricsRecord m;
    m.cumulative_return = cumulative_return(returns);
    m.annualized_return = annualized_return(m.cumulative_return, static_cast<int>(returns.size()));
    m.annualized_volatility = annualized_volatility(returns);
    m.sharpe = sharpe_ratio(m.annualized_return, rf_annual, m.annualized_volatility);
    m.max_drawdown = max_drawdown(values);
    m.total_turnover = total_turn;
    return m;
}

/// Core compounding step shared by the backtester and consistency tests:
/// daily net returns from a per-day weight matrix and per-day costs.
inline std::vector<double> simulate_schedule(const Matrix& returns, const Matrix& weights,
                                             const std::vector<double>& costs) {
    if (weights.rows() != returns.rows() || weights.cols() != returns.cols())
        throw ShapeError("simulate_schedule: weights/returns shapes differ");
    std::vector<double> out(static_cast<size_t>(returns.rows()));
    for (Eigen::Index t = 0; t < returns.rows(); ++t) {
        const double gross = weights.row(t).dot(returns.row(t));
        out[static_cast<size_t>(t)] = gross - costs[static_cast<size_t>(t)];
    }
    return out;
}

/// Runs one strategy over the test range of the panel. Weights are produced
/// at each rebalance from history strictly before that day and drift with
/// relative asset performance in between; costs hit the rebalance day's
/// return.
inline BacktestResult run_backtest(StrategyKind kind, const PricePanel& panel,
                                   const BacktestConfig& cfg, const ModelRegistry& models) {
    const ReturnPanel all_returns = compute_returns(panel);
    int first = 0;
    while (first < all_returns.days() &&
           all_returns.dates[static_cast<size_t>(first)] < cfg.test_start)
        ++first;
    const int test_days = all_returns.days() - first;
    if (first < 1) throw ArgumentError("run_backtest: no history before the test start");
    if (test_days < 2 * cfg.rebalance_interval)
        throw ArgumentError("run_backtest: test range must cover at least 2 rebalance intervals");

    BacktestResult res;
    res.strategy = strategy_name(kind);
    res.tickers = all_returns.tickers;
    res.rebalance_interval = cfg.rebalance_interval;
    res.cost_rate = cfg.cost_rate;
    res.initial_value = cfg.initial_value;
    res.rf_annual = cfg.strategy.rf_annual;
    res.daily_weights.resize(test_days, all_returns.assets());

    Matrix day_returns = all_returns.returns.bottomRows(test_days);
    std::vector<double> costs(static_cast<size_t>(test_days), 0.0);

    Vector current = Vector::Constant(all_returns.assets(), 1.0 / all_returns.assets());
    bool has_position = false;
    double total_turn = 0.0;

    for (int k = 0; k < test_days; ++k) {
        const int g = first + k;  // global return row earned today
        const Date today = all_returns.dates[static_cast<size_t>(g)];
        if (k % cfg.rebalance_interval == 0) {
            ReturnPanel history;
            history.tickers = all_returns.tickers;
            history.dates.assign(all_returns.dates.begin(), all_returns.dates.begin() + g);
            history.returns = all_returns.returns.topRows(g);
            AllocationContext ctx{history, current, today, models, cfg.strategy};
            const WeightVector target = allocate(kind, ctx);
            if (std::abs(target.w.sum() - 1.0) > 1e-9 || target.w.minCoeff() < -1e-12)
                throw StrategyError("strategy " + res.strategy + ": weights off the simplex");
            if (has_position) {
                const double turn = (target.w - current).lpNorm<1>();
                total_turn += turn;
                costs[static_cast<size_t>(k)] = cfg.cost_rate * turn;
            }
            // inception establishes the position cost-free
            current = target.w;
            has_position = true;
            res.rebalance_weights.emplace_back(today, current);
        }
        res.daily_weights.row(k) = current.transpose();
        res.dates.push_back(today);

        // drift: untouched holdings evolve with relative performance
        const double gross = current.dot(day_returns.row(k).transpose());
        if (1.0 + gross <= 0.0) throw NumericError("run_backtest: portfolio value hit zero");
        current = (current.array() * (day_returns.row(k).transpose().array() + 1.0)) /
                  (1.0 + gross);
    }

    res.returns = simulate_schedule(day_returns, res.daily_weights, costs);
    res.values.reserve(static_cast<size_t>(test_days));
    double value = cfg.initial_value;
    for (const double r : res.returns) {
        value *= 1.0 + r;
        if (!std::isfinite(value)) throw NumericError("run_backtest: non-finite value path");
        res.values.push_back(value);
    }
    res.metrics =
        compute_metrics(res.returns, res.values, cfg.strategy.rf_annual, total_turn);

    if (cfg.max_vol_annual > 0.0)
        res.vol_breach = res.metrics.annualized_volatility > cfg.max_vol_annual;
    if (cfg.max_drawdown_limit > 0.0)
        res.drawdown_breach = res.metrics.max_drawdown > cfg.max_drawdown_limit;
    return res;
}

}  // namespace portlab
