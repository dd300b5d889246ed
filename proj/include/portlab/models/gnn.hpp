#pragma once

#include <string>
#include <vector>

#include "portlab/classical/covariance.hpp"
#include "portlab/models/net.hpp"
#include "portlab/models/params_io.hpp"
#include "portlab/numerics/adam.hpp"

namespace portlab {

/// Correlation-threshold asset graph. Edge (i,j) exists iff |corr| >= the
/// threshold over the window; weights are |corr|. Self-loops are not stored;
/// the update handles the self term separately.
struct AssetGraph {
    std::vector<std::string> tickers;
    Matrix weights;        // n x n, zero diagonal, symmetric
    Matrix features;       // n x 3: trailing [mean, std, momentum]
    Matrix neighbor_mean;  // row-normalized weights; zero rows for isolated nodes
    std::vector<std::string> warnings;

    int nodes() const { return static_cast<int>(tickers.size()); }
    bool has_edge(int i, int j) const { return weights(i, j) > 0.0; }
    bool isolated(int i) const { return weights.row(i).sum() == 0.0; }
};

inline AssetGraph build_graph(const ReturnPanel& rp, int window, double threshold) {
    if (window < 2 || window > rp.days())
        throw ArgumentError("build_graph: window must fit the available history");
    if (!(threshold >= 0.0) || threshold >= 1.0)
        throw ArgumentError("build_graph: threshold must lie in [0,1)");

    const int n = rp.assets();
    const Matrix x = rp.returns.bottomRows(window);
    Vector mean(n), sd(n), momentum(n);
    for (int i = 0; i < n; ++i) {
        mean[i] = x.col(i).mean();
        sd[i] = std::sqrt((x.col(i).array() - mean[i]).square().sum() / (window - 1));
        double acc = 1.0;
        for (int t = 0; t < window; ++t) acc *= 1.0 + x(t, i);
        momentum[i] = acc - 1.0;
    }

    AssetGraph g;
    g.tickers = rp.tickers;
    g.weights = Matrix::Zero(n, n);
    g.features.resize(n, 3);
    for (int i = 0; i < n; ++i) g.features.row(i) << mean[i], sd[i], momentum[i];

    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double corr = 0.0;
            if (sd[i] < 1e-12 || sd[j] < 1e-12) {
                // zero-variance asset: correlations defined as 0
            } else {
                const double cov =
                    ((x.col(i).array() - mean[i]) * (x.col(j).array() - mean[j])).sum() /
                    (window - 1);
                corr = cov / (sd[i] * sd[j]);
            }
            const double a = std::abs(corr);
            if (a >= threshold && a > 0.0) {
                g.weights(i, j) = a;
                g.weights(j, i) = a;
            }
        }
    for (int i = 0; i < n; ++i)
        if (sd[i] < 1e-12)
            g.warnings.push_back("zero-variance asset isolated: " + rp.tickers[static_cast<size_t>(i)]);

    g.neighbor_mean = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const double total = g.weights.row(i).sum();
        if (total > 0.0) g.neighbor_mean.row(i) = g.weights.row(i) / total;
    }
    return g;
}

struct GnnConfig {
    int window = 126;
    double threshold = 0.3;
    int layers = 2;
    int hidden = 16;
    int embed_dim = 8;
    int epochs = 60;
    double lr = 1e-2;
    std::uint64_t seed = 0;
};

/// Per-layer self/neighbor transforms plus a final linear head to R^k.
struct GnnParams {
    std::vector<Matrix> w_self;  // in x out
    std::vector<Matrix> w_nbr;
    std::vector<Matrix> bias;  // 1 x out
    Matrix w_out;              // hidden x k
    Matrix b_out;              // 1 x k

    int layers() const { return static_cast<int>(w_self.size()); }

    ParamPack pack() {
        ParamPack p;
        for (int l = 0; l < layers(); ++l) {
            p.add(&w_self[static_cast<size_t>(l)]);
            p.add(&w_nbr[static_cast<size_t>(l)]);
            p.add(&bias[static_cast<size_t>(l)]);
        }
        p.add(&w_out);
        p.add(&b_out);
        return p;
    }
};

struct GnnModel {
    GnnConfig cfg;
    GnnParams params;
};

inline GnnParams make_gnn_params(const GnnConfig& cfg, Pcg32& rng) {
    if (cfg.layers < 1) throw ArgumentError("gnn: need at least one layer");
    GnnParams p;
    int in = 3;  // [mean, std, momentum]
    auto init = [&](int r, int c) {
        Matrix m(r, c);
        const double s = 1.0 / std::sqrt(static_cast<double>(r));
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = s * rng.normal();
        return m;
    };
    for (int l = 0; l < cfg.layers; ++l) {
        p.w_self.push_back(init(in, cfg.hidden));
        p.w_nbr.push_back(init(in, cfg.hidden));
        p.bias.push_back(Matrix::Zero(1, cfg.hidden));
        in = cfg.hidden;
    }
    p.w_out = init(cfg.hidden, cfg.embed_dim);
    p.b_out = Matrix::Zero(1, cfg.embed_dim);
    return p;
}

/// h' = tanh(h W_self + (M h) W_nbr + b) with M the row-normalized weighted
/// adjacency; isolated nodes see a zero neighbor term.
inline Matrix message_pass(const AssetGraph& g, const Matrix& h, const Matrix& w_self,
                           const Matrix& w_nbr, const Matrix& bias) {
    if (h.cols() != w_self.rows() || h.cols() != w_nbr.rows())
        throw ShapeError("message_pass: feature width does not match layer input");
    Matrix pre = h * w_self + (g.neighbor_mean * h) * w_nbr;
    pre.rowwise() += bias.row(0);
    return pre.array().tanh().matrix();
}

inline Matrix gnn_embed(const AssetGraph& g, const GnnParams& p) {
    Matrix h = g.features;
    for (int l = 0; l < p.layers(); ++l)
        h = message_pass(g, h, p.w_self[static_cast<size_t>(l)], p.w_nbr[static_cast<size_t>(l)],
                         p.bias[static_cast<size_t>(l)]);
    return ((h * p.w_out).rowwise() + p.b_out.row(0)).eval();
}

namespace detail {

/// Taped embedding forward; vars are the pack views in order
/// (w_self0, w_nbr0, b0, ..., w_out, b_out).
inline ad::Var gnn_embed_taped(ad::Tape& tape, const AssetGraph& g, int layers,
                               const std::vector<ad::Var>& vars) {
    ad::Var m = tape.constant(g.neighbor_mean);
    ad::Var h = tape.constant(g.features);
    for (int l = 0; l < layers; ++l) {
        ad::Var self_term = ad::matmul(h, vars[static_cast<size_t>(3 * l)]);
        ad::Var nbr_term = ad::matmul(ad::matmul(m, h), vars[static_cast<size_t>(3 * l + 1)]);
        h = ad::tanh(ad::add_rowvec(ad::add(self_term, nbr_term), vars[static_cast<size_t>(3 * l + 2)]));
    }
    return ad::add_rowvec(ad::matmul(h, vars[static_cast<size_t>(3 * layers)]),
                          vars[static_cast<size_t>(3 * layers + 1)]);
}

/// Row-normalize embeddings and form the cosine-similarity Gram matrix.
inline ad::Var cosine_matrix_taped(ad::Tape& tape, ad::Var z) {
    ad::Var norms = ad::sqrt(ad::add_scalar(ad::rowwise_sum(ad::square(z)), 1e-24));
    ad::Var unit = ad::div_colvec(z, norms);
    return ad::matmul(unit, ad::transpose(unit));
}

}  // namespace detail

/// Sigma = D C D: learned cosine-similarity correlations scaled by trailing
/// sample volatilities. Diagonal equals the trailing sample variances.
inline CovarianceEstimate gnn_covariance(const Matrix& embeddings, const ReturnPanel& rp,
                                         int window) {
    if (window < 2 || window > rp.days())
        throw ArgumentError("gnn_covariance: window must fit the available history");
    const int n = rp.assets();
    if (embeddings.rows() != n) throw ShapeError("gnn_covariance: one embedding per asset");

    const Matrix x = rp.returns.bottomRows(window);
    Vector vol(n);
    for (int i = 0; i < n; ++i) {
        const double m = x.col(i).mean();
        vol[i] = std::sqrt((x.col(i).array() - m).square().sum() / (window - 1));
    }

    Matrix corr = Matrix::Identity(n, n);
    std::vector<bool> degenerate(static_cast<size_t>(n), false);
    for (int i = 0; i < n; ++i)
        degenerate[static_cast<size_t>(i)] = embeddings.row(i).norm() < 1e-12;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (degenerate[static_cast<size_t>(i)] || degenerate[static_cast<size_t>(j)]) continue;
            const double c = embeddings.row(i).dot(embeddings.row(j)) /
                             (embeddings.row(i).norm() * embeddings.row(j).norm());
            corr(i, j) = c;
            corr(j, i) = c;
        }

    Matrix sigma = vol.asDiagonal() * corr * vol.asDiagonal();
    sigma = 0.5 * (sigma + sigma.transpose());
    if (min_eigenvalue(sigma) < 0.0) sigma = nearest_psd(sigma, 0.0);
    return CovarianceEstimate{rp.tickers, std::move(sigma), "gnn"};
}

/// Realized sample covariance of a row block (training targets).
inline Matrix realized_covariance(const Matrix& x) {
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - mean;
    Matrix s = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
    return 0.5 * (s + s.transpose());
}

namespace detail {
constexpr int kGnnTargetWindow = 21;  // realized-covariance window and stride
}

/// Taped training loss: mean squared Frobenius distance between the estimate
/// from each trailing window and the next window's realized covariance.
inline ad::Var gnn_training_loss(ad::Tape& tape, const ReturnPanel& rp, const GnnConfig& cfg,
                                 int layers, const std::vector<ad::Var>& vars) {
    const int stride = detail::kGnnTargetWindow;
    int pairs = 0;
    ad::Var total = tape.constant(Matrix::Zero(1, 1));
    for (int t = cfg.window; t + stride <= rp.days(); t += stride) {
        ReturnPanel hist;
        hist.tickers = rp.tickers;
        hist.dates.assign(rp.dates.begin(), rp.dates.begin() + t);
        hist.returns = rp.returns.topRows(t);
        const AssetGraph g = build_graph(hist, cfg.window, cfg.threshold);

        const Matrix est_block = rp.returns.middleRows(t - cfg.window, cfg.window);
        Vector vol(rp.assets());
        for (int i = 0; i < rp.assets(); ++i) {
            const double m = est_block.col(i).mean();
            vol[i] = std::sqrt((est_block.col(i).array() - m).square().sum() / (cfg.window - 1));
        }
        const Matrix vol_outer = vol * vol.transpose();
        const Matrix target = realized_covariance(rp.returns.middleRows(t, stride));

        ad::Var z = detail::gnn_embed_taped(tape, g, layers, vars);
        ad::Var corr = detail::cosine_matrix_taped(tape, z);
        ad::Var sigma_hat = ad::hadamard(corr, tape.constant(vol_outer));
        ad::Var diff = ad::sub(sigma_hat, tape.constant(target));
        total = ad::add(total, ad::sum_all(ad::square(diff)));
        ++pairs;
    }
    if (pairs < 1) throw TrainingError("gnn: no (estimation, target) pairs available");
    return ad::scale(total, 1.0 / pairs);
}

struct GnnTraining {
    GnnModel model;
    std::vector<double> loss_history;
};

/// Adam on the rolling Frobenius loss. Requires at least 20 window pairs.
inline GnnTraining train_gnn(const ReturnPanel& train, const GnnConfig& cfg) {
    const int pairs = (train.days() - cfg.window) / detail::kGnnTargetWindow;
    if (pairs < 20)
        throw TrainingError("gnn: need >= 20 (estimation, target) pairs, have " +
                            std::to_string(std::max(pairs, 0)));

    Pcg32 rng(cfg.seed);
    GnnModel model{cfg, make_gnn_params(cfg, rng)};
    ParamPack pack = model.params.pack();
    Vector flat = pack.flatten();
    AdamState opt;
    GnnTraining out;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        pack.assign(flat);
        ad::Tape tape;
        ad::Var p = tape.param(flat.transpose());
        auto vars = pack.tape_views(tape, p);
        ad::Var loss = gnn_training_loss(tape, train, cfg, cfg.layers, vars);
        const double loss_val = tape.value(loss)(0, 0);
        if (!std::isfinite(loss_val))
            throw TrainingError("gnn diverged at epoch " + std::to_string(epoch));
        out.loss_history.push_back(loss_val);
        tape.backward(loss);
        adam_step(flat, tape.grad(p).row(0).transpose(), opt, cfg.lr);
    }
    pack.assign(flat);
    out.model = std::move(model);
    return out;
}

// --- container round trip -------------------------------------------------

inline ParamContainer to_container(const GnnModel& m) {
    ParamContainer c;
    c.model = "gnn";
    c.layer_sizes = {3};
    for (int l = 0; l < m.params.layers(); ++l) c.layer_sizes.push_back(m.cfg.hidden);
    c.layer_sizes.push_back(m.cfg.embed_dim);
    for (int l = 0; l < m.params.layers(); ++l) {
        c.tensors["self.w" + std::to_string(l)] = m.params.w_self[static_cast<size_t>(l)];
        c.tensors["nbr.w" + std::to_string(l)] = m.params.w_nbr[static_cast<size_t>(l)];
        c.tensors["bias" + std::to_string(l)] = m.params.bias[static_cast<size_t>(l)];
    }
    c.tensors["out.w"] = m.params.w_out;
    c.tensors["out.b"] = m.params.b_out;
    c.config["window"] = m.cfg.window;
    c.config["threshold"] = m.cfg.threshold;
    c.config["layers"] = m.cfg.layers;
    c.config["hidden"] = m.cfg.hidden;
    c.config["embed_dim"] = m.cfg.embed_dim;
    c.config["epochs"] = m.cfg.epochs;
    c.config["lr"] = m.cfg.lr;
    c.config["seed"] = static_cast<double>(m.cfg.seed);
    return c;
}

inline GnnModel gnn_from_container(const ParamContainer& c) {
    if (c.model != "gnn") throw ParseError("container is not a gnn model");
    GnnConfig cfg;
    cfg.window = static_cast<int>(c.config.at("window"));
    cfg.threshold = c.config.at("threshold");
    cfg.layers = static_cast<int>(c.config.at("layers"));
    cfg.hidden = static_cast<int>(c.config.at("hidden"));
    cfg.embed_dim = static_cast<int>(c.config.at("embed_dim"));
    cfg.epochs = static_cast<int>(c.config.at("epochs"));
    cfg.lr = c.config.at("lr");
    cfg.seed = static_cast<std::uint64_t>(c.config.at("seed"));
    GnnModel m;
    m.cfg = cfg;
    for (int l = 0; l < cfg.layers; ++l) {
        m.params.w_self.push_back(c.tensors.at("self.w" + std::to_string(l)));
        m.params.w_nbr.push_back(c.tensors.at("nbr.w" + std::to_string(l)));
        m.params.bias.push_back(c.tensors.at("bias" + std::to_string(l)));
    }
    m.params.w_out = c.tensors.at("out.w");
    m.params.b_out = c.tensors.at("out.b");
    return m;
}

}  // namespace portlab
