#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "portlab/backtest.hpp"
#include "portlab/report/svg.hpp"

namespace portlab {

/// One comparison row. Field set mirrors the summary table layout; the JSON
/// keeps full precision, the md/csv renderings round percentages to 2
/// decimals. Max drawdown carries a leading minus in reports.
struct ReportRow {
    std::string strategy;
    double cumulative_return_pct = 0.0;
    double volatility_pct = 0.0;
    std::optional<double> sharpe;
    double cagr_pct = 0.0;
    double max_drawdown_pct = 0.0;  // negative by presentation convention
};

struct ComparisonReport {
    std::vector<ReportRow> rows;
    std::map<std::string, double> details_turnover;
    std::map<std::string, std::string> failures;  // strategy -> error message
    std::map<std::string, bool> vol_breaches;
    std::map<std::string, bool> drawdown_breaches;
    std::vector<std::string> chart_files;
    std::map<std::string, std::string> config_echo;
};

inline ReportRow make_report_row(const BacktestResult& r) {
    ReportRow row;
    row.strategy = r.strategy;
    row.cumulative_return_pct = 100.0 * r.metrics.cumulative_return;
    row.volatility_pct = 100.0 * r.metrics.annualized_volatility;
    row.sharpe = r.metrics.sharpe;
    row.cagr_pct = 100.0 * r.metrics.annualized_return;
    row.max_drawdown_pct = -100.0 * r.metrics.max_drawdown;
    return row;
}

// ---------------------------------------------------------------------------
// per-strategy artifacts
// ---------------------------------------------------------------------------

inline void write_values_csv(const std::string& path, const BacktestResult& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "date,value,return\n";
    for (size_t t = 0; t < r.dates.size(); ++t)
        out << r.dates[t].to_string() << ',' << detail::format_double(r.values[t]) << ','
            << detail::format_double(r.returns[t]) << '\n';
}

inline void write_weights_csv(const std::string& path, const BacktestResult& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "date";
    for (const auto& t : r.tickers) out << ',' << t;
    out << '\n';
    for (size_t t = 0; t < r.dates.size(); ++t) {
        out << r.dates[t].to_string();
        for (Eigen::Index i = 0; i < r.daily_weights.cols(); ++i)
            out << ',' << detail::format_double(r.daily_weights(static_cast<Eigen::Index>(t), i));
        out << '\n';
    }
}

struct StoredSeries {
    std::vector<Date> dates;
    std::vector<double> values;
    std::vector<double> returns;
};

inline StoredSeries read_values_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "date,value,return")
        throw ParseError(path + ": bad header");
    StoredSeries s;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 3) throw ParseError(path + ": expected 3 cells");
        s.dates.push_back(parse_date_or_throw(cells[0], path));
        s.values.push_back(std::stod(cells[1]));
        s.returns.push_back(std::stod(cells[2]));
    }
    return s;
}

struct StoredWeights {
    std::vector<Date> dates;
    std::vector<std::string> tickers;
    Matrix weights;
};

inline StoredWeights read_weights_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty");
    auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header[0] != "date") throw ParseError(path + ": bad header");
    StoredWeights w;
    w.tickers.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) throw ParseError(path + ": ragged row");
        w.dates.push_back(parse_date_or_throw(cells[0], path));
        std::vector<double> row;
        for (size_t i = 1; i < cells.size(); ++i) row.push_back(std::stod(cells[i]));
        rows.push_back(std::move(row));
    }
    w.weights.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(w.tickers.size()));
    for (size_t t = 0; t < rows.size(); ++t)
        for (size_t i = 0; i < rows[t].size(); ++i)
            w.weights(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = rows[t][i];
    return w;
}

// ---------------------------------------------------------------------------
// report serialization and rendering
// ---------------------------------------------------------------------------

inline nlohmann::json report_to_json(const ComparisonReport& rep) {
    nlohmann::json j;
    j["format"] = "portlab-report-v1";
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.rows) {
        nlohmann::json row;
        row["strategy"] = r.strategy;
        row["cumulative_return_pct"] = r.cumulative_return_pct;
        row["volatility_pct"] = r.volatility_pct;
        if (r.sharpe)
            row["sharpe"] = *r.sharpe;
        else
            row["sharpe"] = nullptr;
        row["cagr_pct"] = r.cagr_pct;
        row["max_drawdown_pct"] = r.max_drawdown_pct;
        rows.push_back(row);
    }
    j["rows"] = rows;
    j["turnover"] = rep.details_turnover;
    j["failures"] = rep.failures;
    j["vol_breaches"] = rep.vol_breaches;
    j["drawdown_breaches"] = rep.drawdown_breaches;
    j["charts"] = rep.chart_files;
    j["config"] = rep.config_echo;
    return j;
}

inline ComparisonReport report_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "portlab-report-v1")
        throw ParseError("report.json: unknown format");
    ComparisonReport rep;
    for (const auto& row : j.at("rows")) {
        ReportRow r;
        r.strategy = row.at("strategy").get<std::string>();
        r.cumulative_return_pct = row.at("cumulative_return_pct").get<double>();
        r.volatility_pct = row.at("volatility_pct").get<double>();
        if (!row.at("sharpe").is_null()) r.sharpe = row.at("sharpe").get<double>();
        r.cagr_pct = row.at("cagr_pct").get<double>();
        r.max_drawdown_pct = row.at("max_drawdown_pct").get<double>();
        rep.rows.push_back(std::move(r));
    }
    rep.details_turnover = j.at("turnover").get<std::map<std::string, double>>();
    rep.failures = j.at("failures").get<std::map<std::string, std::string>>();
    rep.vol_breaches = j.at("vol_breaches").get<std::map<std::string, bool>>();
    rep.drawdown_breaches = j.at("drawdown_breaches").get<std::map<std::string, bool>>();
    rep.chart_files = j.at("charts").get<std::vector<std::string>>();
    rep.config_echo = j.at("config").get<std::map<std::string, std::string>>();
    return rep;
}

inline void save_report(const std::string& path, const ComparisonReport& rep) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << report_to_json(rep).dump(1) << '\n';
}

inline ComparisonReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report.json: ") + e.what());
    }
    return report_from_json(j);
}

namespace detail {
inline std::string pct2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}
inline std::string sharpe4(const std::optional<double>& s) {
    if (!s) return "null";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *s);
    return buf;
}
}  // namespace detail

/// Markdown comparison table, percentages at 2 decimals.
inline std::string render_markdown(const ComparisonReport& rep) {
    std::ostringstream out;
    out << "| Strategy | Cumulative return (%) | Volatility (%) | Sharpe Ratio | CAGR (%) | "
           "Max Drawdown (%) |\n";
    out << "|---|---|---|---|---|---|\n";
    for (const auto& r : rep.rows) {
        out << "| " << r.strategy << " | " << detail::pct2(r.cumulative_return_pct) << " | "
            << detail::pct2(r.volatility_pct) << " | " << detail::sharpe4(r.sharpe) << " | "
            << detail::pct2(r.cagr_pct) << " | " << detail::pct2(r.max_drawdown_pct) << " |\n";
    }
    for (const auto& [name, why] : rep.failures) out << "| " << name << " | failed: " << why
                                                     << " | | | | |\n";
    return out.str();
}

inline std::string render_csv(const ComparisonReport& rep) {
    std::ostringstream out;
    out << "strategy,cumulative_return_pct,volatility_pct,sharpe,cagr_pct,max_drawdown_pct\n";
    for (const auto& r : rep.rows) {
        out << r.strategy << ',' << detail::pct2(r.cumulative_return_pct) << ','
            << detail::pct2(r.volatility_pct) << ',' << detail::sharpe4(r.sharpe) << ','
            << detail::pct2(r.cagr_pct) << ',' << detail::pct2(r.max_drawdown_pct) << '\n';
    }
    return out.str();
}

/// Renders every chart from the stored per-strategy CSVs (no recomputation),
/// so a re-render is byte-identical. Returns the chart file names.
inline std::vector<std::string> render_charts(const std::string& dir,
                                              const ComparisonReport& rep,
                                              double initial_value) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;

    std::vector<std::string> names;
    std::vector<std::vector<double>> paths;
    std::vector<Date> dates;
    std::vector<std::optional<double>> sharpes;
    for (const auto& row : rep.rows) {
        const std::string base = dir + "/" + row.strategy;
        const StoredSeries series = read_values_csv(base + "_values.csv");
        const StoredWeights weights = read_weights_csv(base + "_weights.csv");
        if (dates.empty()) dates = series.dates;
        names.push_back(row.strategy);
        paths.push_back(series.values);
        sharpes.push_back(row.sharpe);

        const std::string weight_file = "weights_" + row.strategy + ".svg";
        std::ofstream out(dir + "/" + weight_file, std::ios::binary);
        out << weights_area_svg(row.strategy + " weight allocation over time", weights.dates,
                                weights.weights, weights.tickers);
        files.push_back(weight_file);
    }
    {
        std::ofstream out(dir + "/cumulative_returns.svg", std::ios::binary);
        out << cumulative_returns_svg("Cumulative returns by strategy", dates, names, paths,
                                      initial_value);
        files.push_back("cumulative_returns.svg");
    }
    {
        std::ofstream out(dir + "/sharpe_ratios.svg", std::ios::binary);
        out << sharpe_bars_svg("Sharpe ratio comparison", names, sharpes);
        files.push_back("sharpe_ratios.svg");
    }
    return files;
}

}  // namespace portlab
