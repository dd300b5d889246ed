#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "portlab/backtest.hpp"
#include "portlab/models/drl.hpp"
#include "portlab/models/gnn.hpp"
#include "portlab/models/transformer.hpp"
#include "portlab/numerics/rng.hpp"

namespace portlab {

/// Every configurable knob, parsed from a flat `key = value` file with `#`
/// comments. Unknown keys are rejected; everything validates before any work
/// starts. Flags may override individual fields afterwards.
struct RunConfig {
    // data.*
    std::string data_endpoint = "https://query1.finance.yahoo.com/v8/finance/chart";
    std::string data_cache_dir = "cache";
    std::vector<std::string> data_tickers = {"AAPL", "TLT", "AMZN", "SPY",
                                             "EFA",  "GLD", "MSFT"};
    Date data_start{2015, 1, 1};
    Date data_end{2023, 12, 31};
    Date data_split{2021, 1, 1};

    // features.*
    FeatureWindows features;

    // cov.* / mvo.*
    double cov_shrink_intensity = -1.0;  // negative = auto
    std::string mvo_mode = "max-sharpe";  // or "target-return"
    double mvo_target_annual = 0.0;
    double mvo_cap = 0.6;
    double mvo_rf_annual = 0.0;
    int mvo_window = 252;

    // ae.*
    AutoencoderConfig ae;

    // gnn.*
    GnnConfig gnn;

    // tf.*
    TransformerConfig tf;

    // drl.*
    DrlConfig drl;

    // backtest.*
    int backtest_interval = 21;
    double backtest_cost_rate = 0.001;
    double backtest_initial_value = 1.0;
    double backtest_max_vol = 0.0;
    double backtest_max_drawdown = 0.0;

    // strategy.*
    std::vector<std::string> strategy_equities = {"SPY"};
    std::vector<std::string> strategy_bonds = {"TLT"};

    // global
    std::uint64_t seed = 42;
    std::string out_dir = "out";

    bool seeded_ae = false, seeded_gnn = false, seeded_tf = false, seeded_drl = false;

    /// Module seeds derive from the global seed unless set explicitly.
    void finalize_seeds() {
        if (!seeded_ae) ae.seed = fanout_seed(seed, "ae");
        if (!seeded_gnn) gnn.seed = fanout_seed(seed, "gnn");
        if (!seeded_tf) tf.seed = fanout_seed(seed, "tf");
        if (!seeded_drl) drl.seed = fanout_seed(seed, "drl");
    }

    StrategyConfig strategy_config() const {
        StrategyConfig s;
        s.cap = mvo_cap;
        s.rf_annual = mvo_rf_annual;
        s.shrink_intensity = cov_shrink_intensity;
        s.trailing_window = mvo_window;
        s.equities = strategy_equities;
        s.bonds = strategy_bonds;
        return s;
    }

    BacktestConfig backtest_config() const {
        BacktestConfig b;
        b.test_start = data_split;
        b.rebalance_interval = backtest_interval;
        b.cost_rate = backtest_cost_rate;
        b.initial_value = backtest_initial_value;
        b.strategy = strategy_config();
        b.max_vol_annual = backtest_max_vol;
        b.max_drawdown_limit = backtest_max_drawdown;
        return b;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto as_double = [&] {
        try {
            return std::stod(value);
        } catch (...) {
            throw ConfigError("config key " + key + ": bad number '" + value + "'");
        }
    };
    auto as_int = [&] { return static_cast<int>(as_double()); };
    auto as_u64 = [&] {
        try {
            return static_cast<std::uint64_t>(std::stoull(value));
        } catch (...) {
            throw ConfigError("config key " + key + ": bad integer '" + value + "'");
        }
    };
    auto as_date = [&] {
        auto d = Date::parse(value);
        if (!d) throw ConfigError("config key " + key + ": bad date '" + value + "'");
        return *d;
    };

    if (key == "data.endpoint") cfg.data_endpoint = value;
    else if (key == "data.cache_dir") cfg.data_cache_dir = value;
    else if (key == "data.tickers") cfg.data_tickers = detail::split_list(value);
    else if (key == "data.start") cfg.data_start = as_date();
    else if (key == "data.end") cfg.data_end = as_date();
    else if (key == "data.split") cfg.data_split = as_date();
    else if (key == "features.vol_window") cfg.features.volatility = as_int();
    else if (key == "features.ma_window") cfg.features.moving_average = as_int();
    else if (key == "features.momentum_window") cfg.features.momentum = as_int();
    else if (key == "cov.shrink_intensity") cfg.cov_shrink_intensity = as_double();
    else if (key == "mvo.mode") cfg.mvo_mode = value;
    else if (key == "mvo.target_annual") cfg.mvo_target_annual = as_double();
    else if (key == "mvo.cap") cfg.mvo_cap = as_double();
    else if (key == "mvo.rf_annual") cfg.mvo_rf_annual = as_double();
    else if (key == "mvo.window") cfg.mvo_window = as_int();
    else if (key == "ae.latent_dim") cfg.ae.latent_dim = as_int();
    else if (key == "ae.hidden") cfg.ae.hidden = as_int();
    else if (key == "ae.epochs") cfg.ae.epochs = as_int();
    else if (key == "ae.lr") cfg.ae.lr = as_double();
    else if (key == "ae.seed") {
        cfg.ae.seed = as_u64();
        cfg.seeded_ae = true;
    } else if (key == "ae.activation") {
        if (value == "tanh") cfg.ae.activation = Activation::Tanh;
        else if (value == "linear") cfg.ae.activation = Activation::Linear;
        else throw ConfigError("ae.activation must be tanh or linear");
    } else if (key == "gnn.window") cfg.gnn.window = as_int();
    else if (key == "gnn.threshold") cfg.gnn.threshold = as_double();
    else if (key == "gnn.layers") cfg.gnn.layers = as_int();
    else if (key == "gnn.hidden") cfg.gnn.hidden = as_int();
    else if (key == "gnn.embed_dim") cfg.gnn.embed_dim = as_int();
    else if (key == "gnn.epochs") cfg.gnn.epochs = as_int();
    else if (key == "gnn.lr") cfg.gnn.lr = as_double();
    else if (key == "gnn.seed") {
        cfg.gnn.seed = as_u64();
        cfg.seeded_gnn = true;
    } else if (key == "tf.window") cfg.tf.window = as_int();
    else if (key == "tf.d_model") cfg.tf.d_model = as_int();
    else if (key == "tf.heads") cfg.tf.heads = as_int();
    else if (key == "tf.layers") cfg.tf.layers = as_int();
    else if (key == "tf.d_ff") cfg.tf.d_ff = as_int();
    else if (key == "tf.epochs") cfg.tf.epochs = as_int();
    else if (key == "tf.lr") cfg.tf.lr = as_double();
    else if (key == "tf.seed") {
        cfg.tf.seed = as_u64();
        cfg.seeded_tf = true;
    } else if (key == "drl.window") cfg.drl.env.window = as_int();
    else if (key == "drl.cost_rate") cfg.drl.env.cost_rate = as_double();
    else if (key == "drl.episode_length") cfg.drl.env.episode_length = as_int();
    else if (key == "drl.gamma") {
        cfg.drl.gamma = as_double();
        cfg.drl.env.gamma = cfg.drl.gamma;
    } else if (key == "drl.lambda") cfg.drl.lambda = as_double();
    else if (key == "drl.clip") cfg.drl.clip = as_double();
    else if (key == "drl.epochs") cfg.drl.update_epochs = as_int();
    else if (key == "drl.minibatch") cfg.drl.minibatch = as_int();
    else if (key == "drl.lr") cfg.drl.lr = as_double();
    else if (key == "drl.iterations") cfg.drl.iterations = as_int();
    else if (key == "drl.episodes_per_iter") cfg.drl.episodes_per_iter = as_int();
    else if (key == "drl.hidden") cfg.drl.hidden = as_int();
    else if (key == "drl.seed") {
        cfg.drl.seed = as_u64();
        cfg.seeded_drl = true;
    } else if (key == "backtest.interval") cfg.backtest_interval = as_int();
    else if (key == "backtest.cost_rate") cfg.backtest_cost_rate = as_double();
    else if (key == "backtest.initial_value") cfg.backtest_initial_value = as_double();
    else if (key == "backtest.max_vol") cfg.backtest_max_vol = as_double();
    else if (key == "backtest.max_drawdown") cfg.backtest_max_drawdown = as_double();
    else if (key == "strategy.equities") cfg.strategy_equities = detail::split_list(value);
    else if (key == "strategy.bonds") cfg.strategy_bonds = detail::split_list(value);
    else if (key == "seed") cfg.seed = as_u64();
    else if (key == "out_dir") cfg.out_dir = value;
    else throw ConfigError("unknown config key: " + key);
}

inline void validate_config(const RunConfig& cfg) {
    if (cfg.mvo_mode != "max-sharpe" && cfg.mvo_mode != "target-return")
        throw ConfigError("mvo.mode must be max-sharpe or target-return");
    if (!(cfg.mvo_cap > 0.0)) throw ConfigError("mvo.cap must be positive");
    if (cfg.data_tickers.empty()) throw ConfigError("data.tickers must not be empty");
    if (cfg.mvo_cap * static_cast<double>(cfg.data_tickers.size()) < 1.0)
        throw ConfigError("mvo.cap infeasible for the universe size");
    if (cfg.cov_shrink_intensity > 1.0)
        throw ConfigError("cov.shrink_intensity must be at most 1");
    if (cfg.backtest_interval < 1) throw ConfigError("backtest.interval must be >= 1");
    if (cfg.backtest_cost_rate < 0.0) throw ConfigError("backtest.cost_rate must be >= 0");
    if (!(cfg.data_start < cfg.data_end)) throw ConfigError("data.start must precede data.end");
    if (!(cfg.data_start < cfg.data_split) || !(cfg.data_split < cfg.data_end))
        throw ConfigError("data.split must lie strictly between data.start and data.end");
    if (cfg.drl.gamma < 0.0 || cfg.drl.gamma > 1.0)
        throw ConfigError("drl.gamma must lie in [0, 1]");
}

inline RunConfig parse_config_stream(std::istream& in, const std::string& name) {
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(name + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        apply_config_entry(cfg, key, value);
    }
    cfg.finalize_seeds();
    validate_config(cfg);
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config_stream(in, path);
}

}  // namespace portlab
