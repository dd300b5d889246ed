#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "portlab/data/calendar.hpp"
#include "portlab/numerics/linalg.hpp"

namespace portlab {

/// Dated asset-by-time matrix of adjusted close prices.
/// Dates strictly increasing, prices strictly positive, no missing cells.
struct PricePanel {
    std::vector<Date> dates;
    std::vector<std::string> tickers;
    Matrix prices;  // T x n

    int days() const { return static_cast<int>(dates.size()); }
    int assets() const { return static_cast<int>(tickers.size()); }
};

/// Simple daily returns; row j covers price date j -> j+1 and is dated by the
/// later day (the day the return is earned).
struct ReturnPanel {
    std::vector<Date> dates;
    std::vector<std::string> tickers;
    Matrix returns;  // (T-1) x n

    int days() const { return static_cast<int>(dates.size()); }
    int assets() const { return static_cast<int>(tickers.size()); }
};

/// What load_prices had to do to make the panel whole.
struct LoadReport {
    int forward_filled = 0;
    int dropped_leading_rows = 0;
};

struct LoadResult {
    PricePanel panel;
    LoadReport report;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw NumericError("format_double failed");
    return std::string(buf, p);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

/// Parses the canonical price CSV (`date,<TICKER>,...`). Empty cells are
/// forward-filled; rows whose gaps precede any observation are dropped.
inline LoadResult load_prices_csv(std::istream& in, const std::string& name) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(name + ": empty file");
    auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header[0] != "date")
        throw ParseError(name + ":1: header must be 'date,<TICKER>,...'");

    PricePanel panel;
    panel.tickers.assign(header.begin() + 1, header.end());
    const size_t n = panel.tickers.size();

    std::vector<std::vector<double>> rows;
    std::vector<std::vector<bool>> present;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != n + 1)
            throw ParseError(name + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(n + 1) + " cells, got " + std::to_string(cells.size()));
        const Date d = parse_date_or_throw(cells[0], name + ":" + std::to_string(lineno));
        if (!panel.dates.empty() && !(panel.dates.back() < d))
            throw ParseError(name + ":" + std::to_string(lineno) + ": dates must be strictly increasing");
        panel.dates.push_back(d);
        std::vector<double> row(n, 0.0);
        std::vector<bool> have(n, false);
        for (size_t i = 0; i < n; ++i) {
            const std::string& cell = cells[i + 1];
            if (cell.empty()) continue;
            double v = 0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || p != cell.data() + cell.size())
                throw ParseError(name + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            row[i] = v;
            have[i] = true;
        }
        rows.push_back(std::move(row));
        present.push_back(std::move(have));
    }

    LoadReport report;
    // Forward fill, then drop leading rows that still have gaps.
    for (size_t i = 0; i < n; ++i) {
        double last = 0;
        bool seen = false;
        for (size_t t = 0; t < rows.size(); ++t) {
            if (present[t][i]) {
                last = rows[t][i];
                seen = true;
            } else if (seen) {
                rows[t][i] = last;
                present[t][i] = true;
                ++report.forward_filled;
            }
        }
    }
    size_t first_complete = 0;
    while (first_complete < rows.size()) {
        bool complete = true;
        for (size_t i = 0; i < n; ++i) complete = complete && present[first_complete][i];
        if (complete) break;
        ++first_complete;
        ++report.dropped_leading_rows;
    }
    if (rows.size() - first_complete < 2) throw DataError(name + ": fewer than 2 usable rows");

    panel.dates.erase(panel.dates.begin(), panel.dates.begin() + static_cast<long>(first_complete));
    panel.prices.resize(static_cast<Eigen::Index>(rows.size() - first_complete),
                        static_cast<Eigen::Index>(n));
    for (size_t t = first_complete; t < rows.size(); ++t)
        for (size_t i = 0; i < n; ++i) {
            const double v = rows[t][i];
            if (!(v > 0.0) || !std::isfinite(v))
                throw DataError(name + ": non-positive price for " + panel.tickers[i] + " on " +
                                panel.dates[t - first_complete].to_string());
            panel.prices(static_cast<Eigen::Index>(t - first_complete),
                         static_cast<Eigen::Index>(i)) = v;
        }
    return LoadResult{std::move(panel), report};
}

inline LoadResult load_prices(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open price file: " + path);
    return load_prices_csv(in, path);
}

/// Canonical writer: shortest round-trip decimals, `\n` newlines.
/// write(load(f)) is byte-identical for files produced by this writer.
inline void write_prices_csv(std::ostream& out, const PricePanel& panel) {
    out << "date";
    for (const auto& t : panel.tickers) out << ',' << t;
    out << '\n';
    for (int t = 0; t < panel.days(); ++t) {
        out << panel.dates[static_cast<size_t>(t)].to_string();
        for (int i = 0; i < panel.assets(); ++i)
            out << ',' << detail::format_double(panel.prices(t, i));
        out << '\n';
    }
}

inline void write_prices(const std::string& path, const PricePanel& panel) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write price file: " + path);
    write_prices_csv(out, panel);
}

inline ReturnPanel compute_returns(const PricePanel& panel) {
    if (panel.days() < 2) throw DataError("compute_returns: need at least 2 rows");
    ReturnPanel out;
    out.tickers = panel.tickers;
    out.dates.assign(panel.dates.begin() + 1, panel.dates.end());
    out.returns.resize(panel.days() - 1, panel.assets());
    for (int t = 0; t + 1 < panel.days(); ++t)
        for (int i = 0; i < panel.assets(); ++i) {
            const double p0 = panel.prices(t, i), p1 = panel.prices(t + 1, i);
            if (!(p0 > 0.0) || !(p1 > 0.0))
                throw DataError("compute_returns: non-positive price at row " + std::to_string(t));
            out.returns(t, i) = p1 / p0 - 1.0;
        }
    return out;
}

/// Inverse of compute_returns given the first price row.
inline PricePanel cumulate_returns(const ReturnPanel& rp, const Vector& first_prices,
                                   Date first_date) {
    PricePanel out;
    out.tickers = rp.tickers;
    out.dates.push_back(first_date);
    for (const Date& d : rp.dates) out.dates.push_back(d);
    out.prices.resize(rp.days() + 1, rp.assets());
    out.prices.row(0) = first_prices.transpose();
    for (int t = 0; t < rp.days(); ++t)
        out.prices.row(t + 1) =
            out.prices.row(t).cwiseProduct((rp.returns.row(t).array() + 1.0).matrix());
    return out;
}

namespace detail {
template <typename Panel>
std::pair<Panel, Panel> split_rows(const Panel& p, Date boundary) {
    if (p.dates.empty() || !(p.dates.front() < boundary) || !(boundary <= p.dates.back()))
        throw ArgumentError("split: boundary " + boundary.to_string() + " not strictly inside range");
    int cut = 0;
    while (cut < static_cast<int>(p.dates.size()) && p.dates[static_cast<size_t>(cut)] < boundary)
        ++cut;
    Panel train = p, test = p;
    train.dates.assign(p.dates.begin(), p.dates.begin() + cut);
    test.dates.assign(p.dates.begin() + cut, p.dates.end());
    return {std::move(train), std::move(test)};
}
}  // namespace detail

/// Chronological split; train covers dates strictly before the boundary.
inline std::pair<PricePanel, PricePanel> split(const PricePanel& p, Date boundary) {
    auto [train, test] = detail::split_rows(p, boundary);
    const int cut = train.days();
    train.prices = p.prices.topRows(cut);
    test.prices = p.prices.bottomRows(p.days() - cut);
    return {std::move(train), std::move(test)};
}

inline std::pair<ReturnPanel, ReturnPanel> split(const ReturnPanel& p, Date boundary) {
    auto [train, test] = detail::split_rows(p, boundary);
    const int cut = train.days();
    train.returns = p.returns.topRows(cut);
    test.returns = p.returns.bottomRows(p.days() - cut);
    return {std::move(train), std::move(test)};
}

}  // namespace portlab
