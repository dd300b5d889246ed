// portlab command line: fetch prices, train models, run the seven-strategy
// backtest, and render comparison reports.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "portlab/data/fetch.hpp"
#include "portlab/report/config.hpp"
#include "portlab/report/report.hpp"

namespace fs = std::filesystem;
using namespace portlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTraining = 3;
constexpr int kExitBacktest = 4;

struct CommonArgs {
    std::string config_path;
    std::string data_path;
    std::string out_dir;
    std::string tickers;
    std::string start, end;
    std::string models = "all";
    std::string strategies = "all";
    std::string format = "md";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

RunConfig effective_config(const CommonArgs& args) {
    RunConfig cfg = args.config_path.empty() ? RunConfig{} : load_config(args.config_path);
    if (args.seed_set) {
        cfg.seed = args.seed;
        cfg.seeded_ae = cfg.seeded_gnn = cfg.seeded_tf = cfg.seeded_drl = false;
    }
    if (!args.tickers.empty()) cfg.data_tickers = detail::split_list(args.tickers);
    if (!args.start.empty()) cfg.data_start = parse_date_or_throw(args.start, "--start");
    if (!args.end.empty()) cfg.data_end = parse_date_or_throw(args.end, "--end");
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    cfg.finalize_seeds();
    validate_config(cfg);
    return cfg;
}

std::vector<std::string> parse_list_or_all(const std::string& arg,
                                           const std::vector<std::string>& all) {
    if (arg == "all") return all;
    auto items = detail::split_list(arg);
    if (items.empty()) throw ArgumentError("empty selection");
    for (const auto& item : items)
        if (std::find(all.begin(), all.end(), item) == all.end()) {
            std::string valid;
            for (const auto& a : all) valid += " " + a;
            throw ArgumentError("unknown name '" + item + "'; valid:" + valid);
        }
    return items;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_fetch(const CommonArgs& args) {
    RunConfig cfg = effective_config(args);
    FetchConfig fetch_cfg{cfg.data_endpoint, cfg.data_cache_dir};
    PricePanel panel = fetch_prices(cfg.data_tickers, cfg.data_start, cfg.data_end, fetch_cfg);
    fs::create_directories(cfg.out_dir);
    const std::string out = cfg.out_dir + "/prices.csv";
    write_prices(out, panel);
    std::cout << "wrote " << out << ": " << panel.days() << " rows x " << panel.assets()
              << " tickers\n";
    return kExitOk;
}

ReturnPanel training_returns(const RunConfig& cfg, const std::string& data_path) {
    auto loaded = load_prices(data_path);
    auto [train_prices, test_prices] = split(loaded.panel, cfg.data_split);
    (void)test_prices;
    return compute_returns(train_prices);
}

AutoencoderModel ensure_autoencoder(const RunConfig& cfg, const ReturnPanel& train,
                                    std::ofstream& log) {
    const std::string path = cfg.out_dir + "/ae.json";
    if (fs::exists(path)) return autoencoder_from_container(load_params(path));
    auto run = train_autoencoder(train, cfg.ae);
    save_params(path, to_container(run.model));
    for (size_t e = 0; e < run.loss_history.size(); ++e)
        log << "ae epoch " << e << " loss " << run.loss_history[e] << "\n";
    return std::move(run.model);
}

int cmd_train(const CommonArgs& args) {
    RunConfig cfg = effective_config(args);
    if (args.data_path.empty()) throw ArgumentError("train: --data <prices.csv> is required");
    const auto models = parse_list_or_all(args.models, {"ae", "gnn", "tf", "drl", "ae_drl"});
    const ReturnPanel train = training_returns(cfg, args.data_path);
    fs::create_directories(cfg.out_dir);
    std::ofstream log(cfg.out_dir + "/train_log.txt", std::ios::binary);

    for (const auto& model : models) {
        try {
            if (model == "ae") {
                if (fs::exists(cfg.out_dir + "/ae.json")) fs::remove(cfg.out_dir + "/ae.json");
                ensure_autoencoder(cfg, train, log);
            } else if (model == "gnn") {
                auto run = train_gnn(train, cfg.gnn);
                save_params(cfg.out_dir + "/gnn.json", to_container(run.model));
                for (size_t e = 0; e < run.loss_history.size(); ++e)
                    log << "gnn epoch " << e << " loss " << run.loss_history[e] << "\n";
            } else if (model == "tf") {
                auto run = train_transformer(train, cfg.tf);
                save_params(cfg.out_dir + "/tf.json", to_container(run.model));
                for (size_t e = 0; e < run.train_mse.size(); ++e)
                    log << "tf epoch " << e << " train_mse " << run.train_mse[e] << " val_mse "
                        << run.val_mse[e] << "\n";
            } else if (model == "drl") {
                DrlConfig dcfg = cfg.drl;
                dcfg.env.cap = cfg.mvo_cap;
                DrlModel m = train_drl(train, dcfg);
                save_params(cfg.out_dir + "/drl.json", to_container(m, "drl"));
                for (size_t i = 0; i < m.history.size(); ++i)
                    log << "drl iter " << i << " mean_reward " << m.history[i].mean_reward
                        << "\n";
            } else if (model == "ae_drl") {
                AutoencoderModel ae = ensure_autoencoder(cfg, train, log);
                DrlConfig dcfg = cfg.drl;
                dcfg.env.cap = cfg.mvo_cap;
                if (!cfg.seeded_drl) dcfg.seed = fanout_seed(cfg.seed, "ae_drl");
                DrlModel m = train_drl(train, dcfg, &ae);
                save_params(cfg.out_dir + "/ae_drl.json", to_container(m, "ae_drl"));
                for (size_t i = 0; i < m.history.size(); ++i)
                    log << "ae_drl iter " << i << " mean_reward " << m.history[i].mean_reward
                        << "\n";
            }
            std::cout << "trained " << model << " -> " << cfg.out_dir << "/" << model << ".json\n";
        } catch (const Error& e) {
            std::cerr << "training " << model << " failed: " << e.what() << "\n";
            return kExitTraining;
        }
    }
    return kExitOk;
}

ModelRegistry load_registry(const RunConfig& cfg, const std::vector<std::string>& strategies) {
    ModelRegistry reg;
    auto want = [&](const char* s) {
        return std::find(strategies.begin(), strategies.end(), s) != strategies.end();
    };
    auto try_load = [&](const char* file) -> std::optional<ParamContainer> {
        const std::string path = cfg.out_dir + "/" + file;
        if (!fs::exists(path)) return std::nullopt;
        return load_params(path);
    };
    if (want("autoencoder") || want("ae_drl"))
        if (auto c = try_load("ae.json")) reg.ae = autoencoder_from_container(*c);
    if (want("transformer_gnn")) {
        if (auto c = try_load("gnn.json")) reg.gnn = gnn_from_container(*c);
        if (auto c = try_load("tf.json")) reg.tf = transformer_from_container(*c);
    }
    if (want("drl_ppo"))
        if (auto c = try_load("drl.json")) reg.drl = drl_from_container(*c);
    if (want("ae_drl"))
        if (auto c = try_load("ae_drl.json")) reg.ae_drl = drl_from_container(*c);
    return reg;
}

int cmd_backtest(const CommonArgs& args) {
    RunConfig cfg = effective_config(args);
    if (args.data_path.empty()) throw ArgumentError("backtest: --data <prices.csv> is required");
    std::vector<std::string> all_names;
    for (const StrategyKind k : kAllStrategies) all_names.push_back(strategy_name(k));
    const auto names = parse_list_or_all(args.strategies, all_names);

    auto loaded = load_prices(args.data_path);
    const BacktestConfig bt = cfg.backtest_config();
    const ModelRegistry registry = load_registry(cfg, names);
    fs::create_directories(cfg.out_dir);

    ComparisonReport report;
    report.config_echo["data"] = args.data_path;
    report.config_echo["test_start"] = cfg.data_split.to_string();
    report.config_echo["rebalance_interval"] = std::to_string(cfg.backtest_interval);
    report.config_echo["cost_rate"] = detail::format_double(cfg.backtest_cost_rate);
    report.config_echo["cap"] = detail::format_double(cfg.mvo_cap);
    report.config_echo["rf_annual"] = detail::format_double(cfg.mvo_rf_annual);
    report.config_echo["seed"] = std::to_string(cfg.seed);
    report.config_echo["initial_value"] = detail::format_double(cfg.backtest_initial_value);

    int failures = 0;
    for (const auto& name : names) {
        try {
            const BacktestResult result =
                run_backtest(parse_strategy(name), loaded.panel, bt, registry);
            write_values_csv(cfg.out_dir + "/" + name + "_values.csv", result);
            write_weights_csv(cfg.out_dir + "/" + name + "_weights.csv", result);
            report.rows.push_back(make_report_row(result));
            report.details_turnover[name] = result.metrics.total_turnover;
            report.vol_breaches[name] = result.vol_breach;
            report.drawdown_breaches[name] = result.drawdown_breach;
            std::cout << "backtested " << name << "\n";
        } catch (const Error& e) {
            report.failures[name] = e.what();
            std::cerr << "strategy " << name << " failed: " << e.what() << "\n";
            ++failures;
        }
    }
    if (!report.rows.empty())
        report.chart_files = render_charts(cfg.out_dir, report, cfg.backtest_initial_value);
    save_report(cfg.out_dir + "/report.json", report);
    {
        std::ofstream md(cfg.out_dir + "/report.md", std::ios::binary);
        md << render_markdown(report);
    }
    std::cout << render_markdown(report);
    return failures == static_cast<int>(names.size()) ? kExitBacktest : kExitOk;
}

int cmd_report(const CommonArgs& args) {
    const std::string dir = args.out_dir.empty() ? "out" : args.out_dir;
    ComparisonReport rep = load_report(dir + "/report.json");
    double initial_value = 1.0;
    if (const auto it = rep.config_echo.find("initial_value"); it != rep.config_echo.end())
        initial_value = std::stod(it->second);
    if (!rep.rows.empty()) render_charts(dir, rep, initial_value);
    if (args.format == "md") {
        std::ofstream md(dir + "/report.md", std::ios::binary);
        md << render_markdown(rep);
        std::cout << render_markdown(rep);
    } else if (args.format == "csv") {
        std::ofstream csv(dir + "/report.csv", std::ios::binary);
        csv << render_csv(rep);
        std::cout << render_csv(rep);
    } else if (args.format == "json") {
        std::cout << report_to_json(rep).dump(1) << "\n";
    } else {
        throw ArgumentError("--format must be json, csv, or md");
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"portfolio strategy lab: data, training, backtests, reports"};
    app.require_subcommand(1);
    CommonArgs args;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", args.config_path, "flat key = value config file");
        cmd->add_option("--data", args.data_path, "price CSV path");
        cmd->add_option("--out", args.out_dir, "output directory");
        cmd->add_option("--seed", args.seed, "global seed")
            ->each([&](const std::string&) { args.seed_set = true; });
        cmd->add_option("--tickers", args.tickers, "comma-separated tickers");
        cmd->add_option("--start", args.start, "start date YYYY-MM-DD");
        cmd->add_option("--end", args.end, "end date YYYY-MM-DD");
    };

    CLI::App* fetch = app.add_subcommand("fetch", "download prices into a canonical CSV");
    add_common(fetch);
    CLI::App* train = app.add_subcommand("train", "train models on the training range");
    add_common(train);
    train->add_option("--models", args.models, "comma list of ae,gnn,tf,drl,ae_drl or all");
    CLI::App* backtest = app.add_subcommand("backtest", "run strategies over the test range");
    add_common(backtest);
    backtest->add_option("--strategies", args.strategies, "comma list or all");
    CLI::App* report = app.add_subcommand("report", "re-render outputs from a report directory");
    add_common(report);
    report->add_option("--format", args.format, "json|csv|md");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (fetch->parsed()) return cmd_fetch(args);
        if (train->parsed()) return cmd_train(args);
        if (backtest->parsed()) return cmd_backtest(args);
        if (report->parsed()) return cmd_report(args);
        return kExitUsage;
    } catch (const ArgumentError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return kExitTraining;
    } catch (const StrategyError& e) {
        std::cerr << "backtest error: " << e.what() << "\n";
        return kExitBacktest;
    } catch (const FetchError& e) {
        std::cerr << "fetch error: " << e.what() << "\n";
        return kExitData;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBacktest;
    }
}
