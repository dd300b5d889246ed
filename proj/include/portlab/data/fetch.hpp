#pragma once

#ifdef PORTLAB_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "portlab/data/panel.hpp"

namespace portlab {

struct FetchConfig {
    std::string endpoint;   // e.g. "http://host:port/quotes"
    std::string cache_dir;  // one canonical CSV per ticker; rerun is offline
    int timeout_seconds = 30;
};

namespace detail {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ArgumentError("endpoint must include scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

/// Accepts either the flat {"timestamp":[...],"adjclose":[...]} object or a
/// Yahoo-style nested chart payload.
inline std::pair<std::vector<std::int64_t>, std::vector<double>> parse_chart_payload(
    const std::string& body, const std::string& ticker) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw FetchError("fetch " + ticker + ": bad JSON: " + e.what());
    }
    const nlohmann::json* ts = nullptr;
    const nlohmann::json* px = nullptr;
    if (j.contains("chart")) {
        const auto& result = j["chart"]["result"];
        if (!result.is_array() || result.empty())
            throw FetchError("fetch " + ticker + ": empty chart result");
        ts = &result[0]["timestamp"];
        px = &result[0]["indicators"]["adjclose"][0]["adjclose"];
    } else {
        if (j.contains("timestamp")) ts = &j["timestamp"];
        if (j.contains("adjclose")) px = &j["adjclose"];
    }
    if (!ts || !px || !ts->is_array() || !px->is_array() || ts->size() != px->size())
        throw FetchError("fetch " + ticker + ": payload missing timestamp/adjclose arrays");
    std::vector<std::int64_t> t;
    std::vector<double> p;
    for (size_t i = 0; i < ts->size(); ++i) {
        if ((*px)[i].is_null()) continue;  // vendor gaps
        t.push_back((*ts)[i].get<std::int64_t>());
        p.push_back((*px)[i].get<double>());
    }
    return {std::move(t), std::move(p)};
}

inline PricePanel single_ticker_panel(const std::string& ticker,
                                      const std::vector<std::int64_t>& secs,
                                      const std::vector<double>& px) {
    PricePanel panel;
    panel.tickers = {ticker};
    panel.prices.resize(static_cast<Eigen::Index>(px.size()), 1);
    for (size_t i = 0; i < px.size(); ++i) {
        const Date d = Date::from_epoch_seconds(secs[i]);
        if (!panel.dates.empty() && !(panel.dates.back() < d))
            throw FetchError("fetch " + ticker + ": timestamps not strictly increasing");
        if (!(px[i] > 0.0)) throw FetchError("fetch " + ticker + ": non-positive price");
        panel.dates.push_back(d);
        panel.prices(static_cast<Eigen::Index>(i), 0) = px[i];
    }
    return panel;
}

}  // namespace detail

/// One ticker: served from cache when present, otherwise GET
/// `{endpoint}?symbol=<T>&period1=<epoch>&period2=<epoch>` and cache the
/// result as a canonical CSV.
inline PricePanel fetch_single(const std::string& ticker, Date start, Date end,
                               const FetchConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path cache_file = fs::path(cfg.cache_dir) / (ticker + ".csv");
    if (!cfg.cache_dir.empty() && fs::exists(cache_file)) {
        auto loaded = load_prices(cache_file.string());
        return std::move(loaded.panel);
    }

    const auto url = detail::split_url(cfg.endpoint);
    httplib::Client client(url.origin);
    client.set_connection_timeout(cfg.timeout_seconds);
    client.set_read_timeout(cfg.timeout_seconds);
    httplib::Params params{{"symbol", ticker},
                           {"period1", std::to_string(start.epoch_seconds())},
                           {"period2", std::to_string(end.epoch_seconds())},
                           {"interval", "1d"}};
    auto res = client.Get(url.path, params, httplib::Headers{});
    if (!res) throw FetchError("fetch " + ticker + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw FetchError("fetch " + ticker + ": HTTP " + std::to_string(res->status));

    auto [secs, px] = detail::parse_chart_payload(res->body, ticker);
    if (px.size() < 2) throw FetchError("fetch " + ticker + ": fewer than 2 observations");
    PricePanel panel = detail::single_ticker_panel(ticker, secs, px);

    if (!cfg.cache_dir.empty()) {
        fs::create_directories(cfg.cache_dir);
        write_prices(cache_file.string(), panel);  // last writer wins
    }
    return panel;
}

/// Fetches every ticker and aligns on the union of dates (forward-fill,
/// leading-incomplete rows dropped — the same policy as load_prices).
inline PricePanel fetch_prices(const std::vector<std::string>& tickers, Date start, Date end,
                               const FetchConfig& cfg) {
    if (tickers.empty()) throw ArgumentError("fetch_prices: empty ticker list");
    if (!(start < end)) throw ArgumentError("fetch_prices: start must precede end");

    std::vector<PricePanel> singles;
    std::vector<std::string> missing;
    for (const auto& t : tickers) {
        try {
            singles.push_back(fetch_single(t, start, end, cfg));
        } catch (const FetchError&) {
            missing.push_back(t);
        }
    }
    if (!missing.empty()) {
        std::string msg = "fetch_prices: missing tickers:";
        for (const auto& t : missing) msg += " " + t;
        throw FetchError(msg);
    }

    std::map<Date, std::vector<double>> grid;  // union of dates
    for (size_t k = 0; k < singles.size(); ++k)
        for (int t = 0; t < singles[k].days(); ++t)
            grid.try_emplace(singles[k].dates[static_cast<size_t>(t)],
                             std::vector<double>(tickers.size(), 0.0));
    std::map<Date, std::vector<bool>> have;
    for (auto& [d, row] : grid) have.emplace(d, std::vector<bool>(tickers.size(), false));
    for (size_t k = 0; k < singles.size(); ++k)
        for (int t = 0; t < singles[k].days(); ++t) {
            const Date d = singles[k].dates[static_cast<size_t>(t)];
            grid[d][k] = singles[k].prices(t, 0);
            have[d][k] = true;
        }

    // Reuse the loader's cleaning semantics by writing through its code path.
    std::ostringstream csv;
    csv << "date";
    for (const auto& t : tickers) csv << ',' << t;
    csv << '\n';
    for (const auto& [d, row] : grid) {
        csv << d.to_string();
        for (size_t k = 0; k < row.size(); ++k) {
            csv << ',';
            if (have[d][k]) csv << detail::format_double(row[k]);
        }
        csv << '\n';
    }
    std::istringstream in(csv.str());
    return load_prices_csv(in, "fetch_prices").panel;
}

}  // namespace portlab
