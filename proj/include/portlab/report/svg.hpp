#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "portlab/data/calendar.hpp"
#include "portlab/numerics/linalg.hpp"

namespace portlab {

// Static SVG chart emission. Output is deterministic: fixed-precision
// coordinates, no timestamps.

namespace svg {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

inline const std::vector<std::string>& palette() {
    static const std::vector<std::string> colors = {"#4878cf", "#ee854a", "#6acc65", "#d65f5f",
                                                    "#956cb4", "#8c613c", "#dc7ec0", "#797979"};
    return colors;
}

struct Frame {
    double width = 860, height = 420;
    double left = 70, right = 30, top = 40, bottom = 50;

    double plot_w() const { return width - left - right; }
    double plot_h() const { return height - top - bottom; }
    double x(double frac) const { return left + frac * plot_w(); }
    double y(double frac) const { return top + (1.0 - frac) * plot_h(); }
};

inline void open_chart(std::ostringstream& out, const Frame& f, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
        << f.height << "\" viewBox=\"0 0 " << f.width << " " << f.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << num(f.width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
}

inline void axes(std::ostringstream& out, const Frame& f, const std::string& x_label,
                 const std::string& y_label) {
    out << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.height - f.bottom) << "\" x2=\""
        << num(f.width - f.right) << "\" y2=\"" << num(f.height - f.bottom)
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.top) << "\" x2=\"" << num(f.left)
        << "\" y2=\"" << num(f.height - f.bottom) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(f.left + f.plot_w() / 2) << "\" y=\"" << num(f.height - 12)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
        << "</text>\n";
    out << "<text x=\"16\" y=\"" << num(f.top + f.plot_h() / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 16 " << num(f.top + f.plot_h() / 2) << ")\">" << y_label
        << "</text>\n";
}

inline void y_ticks(std::ostringstream& out, const Frame& f, double lo, double hi, int count,
                    const char* fmt) {
    for (int i = 0; i <= count; ++i) {
        const double frac = static_cast<double>(i) / count;
        const double value = lo + frac * (hi - lo);
        char label[48];
        std::snprintf(label, sizeof(label), fmt, value);
        out << "<line x1=\"" << num(f.left - 4) << "\" y1=\"" << num(f.y(frac)) << "\" x2=\""
            << num(f.left) << "\" y2=\"" << num(f.y(frac)) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << num(f.left - 8) << "\" y=\"" << num(f.y(frac) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << label
            << "</text>\n";
    }
}

inline void date_ticks(std::ostringstream& out, const Frame& f, const std::vector<Date>& dates) {
    if (dates.size() < 2) return;
    const int ticks = std::min<int>(6, static_cast<int>(dates.size()) - 1);
    for (int i = 0; i <= ticks; ++i) {
        const double frac = static_cast<double>(i) / ticks;
        const size_t idx = static_cast<size_t>(frac * (dates.size() - 1));
        out << "<text x=\"" << num(f.x(frac)) << "\" y=\"" << num(f.height - f.bottom + 16)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
            << dates[idx].to_string() << "</text>\n";
    }
}

inline void legend(std::ostringstream& out, const Frame& f,
                   const std::vector<std::string>& names) {
    const double x0 = f.width - f.right - 150;
    for (size_t i = 0; i < names.size(); ++i) {
        const double y0 = f.top + 8 + 16 * static_cast<double>(i);
        out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0 - 9)
            << "\" width=\"12\" height=\"12\" fill=\"" << palette()[i % palette().size()]
            << "\"/>\n";
        out << "<text x=\"" << num(x0 + 16) << "\" y=\"" << num(y0 + 2)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << names[i] << "</text>\n";
    }
}

}  // namespace svg

/// Stacked area chart of weights over time (rows = days, cols = assets).
/// Weights are cumulatively stacked from the x-axis; long-only inputs fill
/// the [0, 1] band.
inline std::string weights_area_svg(const std::string& title, const std::vector<Date>& dates,
                                    const Matrix& weights,
                                    const std::vector<std::string>& tickers) {
    svg::Frame f;
    std::ostringstream out;
    svg::open_chart(out, f, title);
    svg::axes(out, f, "date", "weight");
    svg::y_ticks(out, f, 0.0, 1.0, 5, "%.1f");
    svg::date_ticks(out, f, dates);

    const auto rows = weights.rows();
    Vector lower = Vector::Zero(rows);
    for (int a = 0; a < weights.cols(); ++a) {
        Vector upper = lower + weights.col(a);
        std::ostringstream path;
        for (Eigen::Index t = 0; t < rows; ++t) {
            const double frac = rows > 1 ? static_cast<double>(t) / (rows - 1) : 0.0;
            path << (t == 0 ? "M" : "L") << svg::num(f.x(frac)) << " "
                 << svg::num(f.y(std::clamp(upper[t], 0.0, 1.0))) << " ";
        }
        for (Eigen::Index t = rows - 1; t >= 0; --t) {
            const double frac = rows > 1 ? static_cast<double>(t) / (rows - 1) : 0.0;
            path << "L" << svg::num(f.x(frac)) << " "
                 << svg::num(f.y(std::clamp(lower[t], 0.0, 1.0))) << " ";
        }
        out << "<path d=\"" << path.str() << "Z\" fill=\""
            << svg::palette()[static_cast<size_t>(a) % svg::palette().size()]
            << "\" fill-opacity=\"0.85\" stroke=\"none\"/>\n";
        lower = upper;
    }
    svg::legend(out, f, tickers);
    out << "</svg>\n";
    return out.str();
}

/// Multi-line chart of cumulative return percentages per strategy.
inline std::string cumulative_returns_svg(const std::string& title,
                                          const std::vector<Date>& dates,
                                          const std::vector<std::string>& names,
                                          const std::vector<std::vector<double>>& value_paths,
                                          double initial_value) {
    svg::Frame f;
    double lo = 0.0, hi = 0.0;
    for (const auto& path : value_paths)
        for (const double v : path) {
            const double pct = 100.0 * (v / initial_value - 1.0);
            lo = std::min(lo, pct);
            hi = std::max(hi, pct);
        }
    if (hi <= lo) hi = lo + 1.0;

    std::ostringstream out;
    svg::open_chart(out, f, title);
    svg::axes(out, f, "date", "cumulative return (%)");
    svg::y_ticks(out, f, lo, hi, 5, "%.1f");
    svg::date_ticks(out, f, dates);
    for (size_t s = 0; s < value_paths.size(); ++s) {
        const auto& path = value_paths[s];
        std::ostringstream d;
        for (size_t t = 0; t < path.size(); ++t) {
            const double frac =
                path.size() > 1 ? static_cast<double>(t) / (path.size() - 1) : 0.0;
            const double pct = 100.0 * (path[t] / initial_value - 1.0);
            d << (t == 0 ? "M" : "L") << svg::num(f.x(frac)) << " "
              << svg::num(f.y((pct - lo) / (hi - lo))) << " ";
        }
        out << "<path d=\"" << d.str() << "\" fill=\"none\" stroke=\""
            << svg::palette()[s % svg::palette().size()] << "\" stroke-width=\"1.5\"/>\n";
    }
    svg::legend(out, f, names);
    out << "</svg>\n";
    return out.str();
}

/// Bar chart of Sharpe ratios per strategy; null Sharpe renders as a zero bar
/// labeled n/a.
inline std::string sharpe_bars_svg(const std::string& title,
                                   const std::vector<std::string>& names,
                                   const std::vector<std::optional<double>>& sharpes) {
    svg::Frame f;
    double lo = 0.0, hi = 0.0;
    for (const auto& s : sharpes)
        if (s) {
            lo = std::min(lo, *s);
            hi = std::max(hi, *s);
        }
    if (hi <= lo) hi = lo + 1.0;

    std::ostringstream out;
    svg::open_chart(out, f, title);
    svg::axes(out, f, "strategy", "Sharpe ratio");
    svg::y_ticks(out, f, lo, hi, 5, "%.2f");
    const double slot = f.plot_w() / static_cast<double>(names.size());
    const double zero_frac = (0.0 - lo) / (hi - lo);
    for (size_t i = 0; i < names.size(); ++i) {
        const double cx = f.left + slot * (static_cast<double>(i) + 0.5);
        const double value = sharpes[i].value_or(0.0);
        const double vfrac = (value - lo) / (hi - lo);
        const double y0 = f.y(std::max(vfrac, zero_frac));
        const double h = std::abs(f.y(vfrac) - f.y(zero_frac));
        out << "<rect x=\"" << svg::num(cx - slot * 0.3) << "\" y=\"" << svg::num(y0)
            << "\" width=\"" << svg::num(slot * 0.6) << "\" height=\"" << svg::num(h)
            << "\" fill=\"" << svg::palette()[i % svg::palette().size()] << "\"/>\n";
        char label[32];
        if (sharpes[i])
            std::snprintf(label, sizeof(label), "%.2f", *sharpes[i]);
        else
            std::snprintf(label, sizeof(label), "n/a");
        out << "<text x=\"" << svg::num(cx) << "\" y=\"" << svg::num(y0 - 4)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << label
            << "</text>\n";
        out << "<text x=\"" << svg::num(cx) << "\" y=\"" << svg::num(f.height - f.bottom + 16)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << names[i]
            << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace portlab
