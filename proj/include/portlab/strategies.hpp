#pragma once

#include <array>
#include <optional>
#include <string>

#include "portlab/classical/mvo.hpp"
#include "portlab/models/autoencoder.hpp"
#include "portlab/models/drl.hpp"
#include "portlab/models/gnn.hpp"
#include "portlab/models/transformer.hpp"

namespace portlab {

/// The seven backtested strategies. Names below are the canonical
/// identifiers in CLI flags, config, and report files.
enum class StrategyKind {
    DrlPpo,
    Autoencoder,
    AeDrl,
    TransformerGnn,
    Mvo,
    EqualWeight,
    SixtyForty,
};

inline constexpr std::array<StrategyKind, 7> kAllStrategies = {
    StrategyKind::DrlPpo,     StrategyKind::Autoencoder, StrategyKind::AeDrl,
    StrategyKind::TransformerGnn, StrategyKind::Mvo,     StrategyKind::EqualWeight,
    StrategyKind::SixtyForty,
};

inline std::string strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::DrlPpo: return "drl_ppo";
        case StrategyKind::Autoencoder: return "autoencoder";
        case StrategyKind::AeDrl: return "ae_drl";
        case StrategyKind::TransformerGnn: return "transformer_gnn";
        case StrategyKind::Mvo: return "mvo";
        case StrategyKind::EqualWeight: return "equal_weight";
        case StrategyKind::SixtyForty: return "sixty_forty";
    }
    throw ArgumentError("unknown strategy kind");
}

inline StrategyKind parse_strategy(const std::string& name) {
    for (const StrategyKind k : kAllStrategies)
        if (strategy_name(k) == name) return k;
    std::string valid;
    for (const StrategyKind k : kAllStrategies) valid += " " + strategy_name(k);
    throw ArgumentError("unknown strategy '" + name + "'; valid:" + valid);
}

struct StrategyConfig {
    double cap = 0.6;
    double rf_annual = 0.0;
    double shrink_intensity = -1.0;  // negative = automatic n/(n+T)
    int trailing_window = 252;       // mu and Sigma estimation window
    std::vector<std::string> equities = {"SPY"};
    std::vector<std::string> bonds = {"TLT"};
};

struct ModelRegistry {
    std::optional<AutoencoderModel> ae;
    std::optional<GnnModel> gnn;
    std::optional<TransformerModel> tf;
    std::optional<DrlModel> drl;
    std::optional<DrlModel> ae_drl;
};

/// Everything a strategy may look at when producing weights for one
/// rebalance date: history strictly before the date, the previous weights,
/// and the trained models.
struct AllocationContext {
    const ReturnPanel& history;
    Vector prev_weights;
    Date rebalance_date;
    const ModelRegistry& models;
    StrategyConfig cfg;
};

namespace detail {

inline ReturnPanel trailing(const ReturnPanel& rp, int window) {
    const int rows = std::min(rp.days(), window);
    ReturnPanel out;
    out.tickers = rp.tickers;
    out.dates.assign(rp.dates.end() - rows, rp.dates.end());
    out.returns = rp.returns.bottomRows(rows);
    return out;
}

inline ExpectedReturns trailing_mean(const ReturnPanel& rp, int window,
                                     const std::vector<std::string>& tickers) {
    const int rows = std::min(rp.days(), window);
    return ExpectedReturns{tickers,
                           rp.returns.bottomRows(rows).colwise().mean().transpose()};
}

inline WeightVector max_sharpe(const ExpectedReturns& mu, const CovarianceEstimate& sigma,
                               const StrategyConfig& cfg) {
    MvoConstraints cons;
    cons.mode = MvoMode::MaxSharpe;
    cons.cap = cfg.cap;
    cons.rf_annual = cfg.rf_annual;
    return solve_mvo(mu, sigma, cons);
}

inline CovarianceEstimate shrunk(const CovarianceEstimate& emp, const StrategyConfig& cfg,
                                 int observations) {
    const double intensity = cfg.shrink_intensity >= 0.0
                                 ? cfg.shrink_intensity
                                 : auto_shrink_intensity(static_cast<int>(emp.tickers.size()),
                                                         observations);
    return shrink_covariance(emp, intensity);
}

inline Vector drl_weights(const DrlModel& model, const AllocationContext& ctx, bool hybrid) {
    const int w = model.cfg.env.window;
    if (ctx.history.days() < w)
        throw DataError("drl allocation: history shorter than the state window");
    EnvState state;
    state.window =
        apply_standardizer(ctx.history.returns.bottomRows(w), model.scaler);
    state.weights = ctx.prev_weights;
    if (hybrid) {
        const Vector last_std =
            apply_standardizer(Vector(ctx.history.returns.row(ctx.history.days() - 1).transpose()),
                               model.scaler);
        // latent code of the most recent observed day, standardized as in training
        if (!ctx.models.ae)
            throw ConfigError("strategy ae_drl: autoencoder model not available");
        const Vector code = encode(*ctx.models.ae, last_std);
        state.latent = apply_standardizer(code, model.z_scaler);
    }

    // deterministic policy: mean logits -> softmax -> cap projection
    Vector x(state.window.size() + state.weights.size() + state.latent.size());
    int at = 0;
    for (Eigen::Index r = 0; r < state.window.rows(); ++r)
        for (Eigen::Index c = 0; c < state.window.cols(); ++c) x[at++] = state.window(r, c);
    for (Eigen::Index i = 0; i < state.weights.size(); ++i) x[at++] = state.weights[i];
    for (Eigen::Index i = 0; i < state.latent.size(); ++i) x[at++] = state.latent[i];
    if (x.size() != model.state_dim)
        throw ConfigError("drl allocation: state layout does not match the trained agent");
    const Vector logits = model.agent.policy.forward(x.transpose()).row(0).transpose();
    Vector weights = softmax(logits);
    if (weights.maxCoeff() > ctx.cfg.cap) weights = project_capped_simplex(weights, ctx.cfg.cap);
    return weights;
}

}  // namespace detail

/// Produces the WeightVector for one rebalance. Pure in the context; never
/// reads data at or after the rebalance date.
inline WeightVector allocate(StrategyKind kind, const AllocationContext& ctx) {
    const auto& tickers = ctx.history.tickers;
    const int n = static_cast<int>(tickers.size());
    if (n == 0) throw ArgumentError("allocate: empty universe");
    if (!ctx.history.dates.empty() && !(ctx.history.dates.back() < ctx.rebalance_date))
        throw ArgumentError("allocate: history must end strictly before the rebalance date");

    try {
        switch (kind) {
            case StrategyKind::EqualWeight:
                return WeightVector{tickers, Vector::Constant(n, 1.0 / n)};

            case StrategyKind::SixtyForty: {
                Vector w = Vector::Zero(n);
                auto spread = [&](const std::vector<std::string>& legs, double total) {
                    std::vector<int> present;
                    for (int i = 0; i < n; ++i)
                        for (const auto& leg : legs)
                            if (tickers[static_cast<size_t>(i)] == leg) present.push_back(i);
                    if (present.empty())
                        throw ConfigError("sixty_forty: no configured tickers in the universe");
                    for (const int i : present) w[i] = total / present.size();
                };
                spread(ctx.cfg.equities, 0.60);
                spread(ctx.cfg.bonds, 0.40);
                return WeightVector{tickers, w};
            }

            case StrategyKind::Mvo: {
                const auto mu = detail::trailing_mean(ctx.history, ctx.cfg.trailing_window, tickers);
                const int obs = std::min(ctx.history.days(), ctx.cfg.trailing_window);
                auto sigma = empirical_covariance(ctx.history, ctx.cfg.trailing_window);
                sigma = detail::shrunk(sigma, ctx.cfg, obs);
                return detail::max_sharpe(mu, sigma, ctx.cfg);
            }

            case StrategyKind::Autoencoder: {
                if (!ctx.models.ae)
                    throw ConfigError("strategy autoencoder: model not available");
                const auto mu = detail::trailing_mean(ctx.history, ctx.cfg.trailing_window, tickers);
                const auto recent = detail::trailing(ctx.history, ctx.cfg.trailing_window);
                const auto sigma = ae_covariance(*ctx.models.ae, recent);
                return detail::max_sharpe(mu, sigma, ctx.cfg);
            }

            case StrategyKind::TransformerGnn: {
                if (!ctx.models.tf)
                    throw ConfigError("strategy transformer_gnn: transformer model not available");
                if (!ctx.models.gnn)
                    throw ConfigError("strategy transformer_gnn: gnn model not available");
                const int L = ctx.models.tf->cfg.window;
                if (ctx.history.days() < L)
                    throw DataError("transformer_gnn: history shorter than the forecast window");
                const auto mu = forecast_returns(*ctx.models.tf, tickers,
                                                 ctx.history.returns.bottomRows(L));
                const auto& gcfg = ctx.models.gnn->cfg;
                const AssetGraph graph = build_graph(ctx.history, gcfg.window, gcfg.threshold);
                const Matrix z = gnn_embed(graph, ctx.models.gnn->params);
                const auto sigma = gnn_covariance(z, ctx.history, gcfg.window);
                return detail::max_sharpe(mu, sigma, ctx.cfg);
            }

            case StrategyKind::DrlPpo: {
                if (!ctx.models.drl) throw ConfigError("strategy drl_ppo: model not available");
                return WeightVector{tickers, detail::drl_weights(*ctx.models.drl, ctx, false)};
            }

            case StrategyKind::AeDrl: {
                if (!ctx.models.ae_drl) throw ConfigError("strategy ae_drl: model not available");
                return WeightVector{tickers, detail::drl_weights(*ctx.models.ae_drl, ctx, true)};
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        // solver/inference failures propagate tagged with the strategy
        throw StrategyError("strategy " + strategy_name(kind) + ": " + e.what());
    }
    throw ArgumentError("allocate: unknown strategy");
}

}  // namespace portlab
