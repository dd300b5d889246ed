#pragma once

#include <string>
#include <vector>

#include "portlab/data/panel.hpp"

namespace portlab {

struct FeatureWindows {
    int volatility = 21;
    int moving_average = 21;
    int momentum = 63;

    int max() const { return std::max(volatility, std::max(moving_average, momentum)); }
};

/// Per-asset rolling features over returns. Row t uses returns at dates <= t
/// only; rows before every window has filled are flagged invalid.
struct FeaturePanel {
    std::vector<Date> dates;
    std::vector<std::string> columns;  // "<TICKER>.vol" / ".ma" / ".mom"
    Matrix values;
    int valid_from = 0;  // first row with complete windows

    int rows() const { return static_cast<int>(dates.size()); }
    bool row_valid(int t) const { return t >= valid_from; }
};

inline FeaturePanel compute_features(const ReturnPanel& rp, const FeatureWindows& win = {}) {
    if (win.volatility < 2 || win.moving_average < 2 || win.momentum < 2)
        throw ArgumentError("compute_features: windows must be >= 2 days");
    if (rp.days() <= win.max())
        throw ArgumentError("compute_features: window longer than series");

    const int n = rp.assets();
    FeaturePanel fp;
    fp.dates = rp.dates;
    fp.valid_from = win.max() - 1;
    fp.values = Matrix::Zero(rp.days(), 3 * n);
    for (int i = 0; i < n; ++i) {
        fp.columns.push_back(rp.tickers[static_cast<size_t>(i)] + ".vol");
        fp.columns.push_back(rp.tickers[static_cast<size_t>(i)] + ".ma");
        fp.columns.push_back(rp.tickers[static_cast<size_t>(i)] + ".mom");
    }

    for (int t = 0; t < rp.days(); ++t) {
        for (int i = 0; i < n; ++i) {
            // trailing windows ending at (and including) t
            if (t + 1 >= win.volatility) {
                const auto seg = rp.returns.col(i).segment(t + 1 - win.volatility, win.volatility);
                const double mean = seg.mean();
                fp.values(t, 3 * i + 0) =
                    std::sqrt((seg.array() - mean).square().sum() / (win.volatility - 1));
            }
            if (t + 1 >= win.moving_average) {
                fp.values(t, 3 * i + 1) =
                    rp.returns.col(i).segment(t + 1 - win.moving_average, win.moving_average).mean();
            }
            if (t + 1 >= win.momentum) {
                double acc = 1.0;
                for (int u = t + 1 - win.momentum; u <= t; ++u) acc *= 1.0 + rp.returns(u, i);
                fp.values(t, 3 * i + 2) = acc - 1.0;
            }
        }
    }
    return fp;
}

/// Column standardizer fitted on a training range only.
/// Zero-variance handling is a policy choice: feature pipelines drop the
/// column (recorded), model input pipelines keep it (centered, unit divisor).
struct Scaler {
    enum class ZeroVariance { Drop, Keep };

    std::vector<std::string> columns;  // post-drop column names
    Vector mean;
    Vector stddev;
    std::vector<std::string> dropped;  // zero-variance columns removed at fit
    std::vector<int> kept_indices;     // into the original column order

    int dims() const { return static_cast<int>(mean.size()); }
};

inline Scaler fit_standardizer(const Matrix& values, const std::vector<std::string>& columns,
                               int row_begin, int row_end,
                               Scaler::ZeroVariance policy = Scaler::ZeroVariance::Drop) {
    if (row_begin < 0 || row_end > values.rows() || row_end - row_begin < 2)
        throw ArgumentError("fit_standardizer: training range must hold at least 2 rows");
    const int rows = row_end - row_begin;
    Scaler s;
    std::vector<double> means, stds;
    for (int c = 0; c < values.cols(); ++c) {
        const auto seg = values.col(c).segment(row_begin, rows);
        const double m = seg.mean();
        const double sd = std::sqrt((seg.array() - m).square().sum() / (rows - 1));
        if (sd < 1e-12 && policy == Scaler::ZeroVariance::Drop) {
            s.dropped.push_back(columns[static_cast<size_t>(c)]);
            continue;
        }
        s.kept_indices.push_back(c);
        s.columns.push_back(columns[static_cast<size_t>(c)]);
        means.push_back(m);
        stds.push_back(sd < 1e-12 ? 1.0 : sd);
    }
    s.mean = Eigen::Map<Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
    s.stddev = Eigen::Map<Vector>(stds.data(), static_cast<Eigen::Index>(stds.size()));
    return s;
}

inline Matrix apply_standardizer(const Matrix& values, const Scaler& s) {
    Matrix out(values.rows(), s.dims());
    for (int k = 0; k < s.dims(); ++k)
        out.col(k) = (values.col(s.kept_indices[static_cast<size_t>(k)]).array() - s.mean[k]) /
                     s.stddev[k];
    return out;
}

inline Vector apply_standardizer(const Vector& row, const Scaler& s) {
    Vector out(s.dims());
    for (int k = 0; k < s.dims(); ++k)
        out[k] = (row[s.kept_indices[static_cast<size_t>(k)]] - s.mean[k]) / s.stddev[k];
    return out;
}

/// Inverse transform (Keep-policy scalers only, where no columns vanished).
inline Matrix invert_standardizer(const Matrix& std_values, const Scaler& s) {
    Matrix out(std_values.rows(), s.dims());
    for (int k = 0; k < s.dims(); ++k)
        out.col(k) = (std_values.col(k).array() * s.stddev[k]) + s.mean[k];
    return out;
}

/// Convenience: per-asset return standardizer (keeps every asset column).
inline Scaler fit_return_scaler(const ReturnPanel& train) {
    return fit_standardizer(train.returns, train.tickers, 0, train.days(),
                            Scaler::ZeroVariance::Keep);
}

}  // namespace portlab
