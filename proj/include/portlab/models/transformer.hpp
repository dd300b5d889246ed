#pragma once

#include <string>
#include <vector>

#include "portlab/classical/covariance.hpp"
#include "portlab/models/net.hpp"
#include "portlab/models/params_io.hpp"
#include "portlab/numerics/adam.hpp"

namespace portlab {

/// Sinusoidal table: PE(i, 2j) = sin(i / 10000^(2j/d_model)), odd -> cos.
inline Matrix positional_encoding(int length, int d_model) {
    if (d_model % 2 != 0) throw ArgumentError("positional_encoding: d_model must be even");
    if (length < 1 || d_model < 2) throw ArgumentError("positional_encoding: bad dimensions");
    Matrix pe(length, d_model);
    for (int i = 0; i < length; ++i)
        for (int j = 0; j < d_model / 2; ++j) {
            const double rate = std::pow(10000.0, 2.0 * j / d_model);
            pe(i, 2 * j) = std::sin(i / rate);
            pe(i, 2 * j + 1) = std::cos(i / rate);
        }
    return pe;
}

/// Scaled dot-product attention: softmax(Q K' / sqrt(d_k)) V, row-wise.
inline Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (q.cols() != k.cols() || k.rows() != v.rows())
        throw ShapeError("attention: Q/K/V shapes do not conform");
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Matrix scores = (q * k.transpose()) * scale;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const double m = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - m).exp();
        scores.row(r) /= scores.row(r).sum();
    }
    return scores * v;
}

/// The raw attention weight matrix (exposed for contract tests).
inline Matrix attention_weights(const Matrix& q, const Matrix& k) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Matrix scores = (q * k.transpose()) * scale;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const double m = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - m).exp();
        scores.row(r) /= scores.row(r).sum();
    }
    return scores;
}

struct TransformerConfig {
    int window = 60;  // L
    int d_model = 32;
    int heads = 4;
    int layers = 2;
    int d_ff = 64;
    int epochs = 10;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    double ln_eps = 1e-5;

    int d_k() const { return d_model / heads; }
};

struct TransformerLayer {
    std::vector<Matrix> w_q, w_k, w_v;  // per head, d_model x d_k
    Matrix w_o;                         // d_model x d_model
    Matrix b_o;                         // 1 x d_model
    Matrix ln1_gain, ln1_bias;
    Matrix ff_w1, ff_b1;  // d_model x d_ff, 1 x d_ff
    Matrix ff_w2, ff_b2;  // d_ff x d_model, 1 x d_model
    Matrix ln2_gain, ln2_bias;
};

struct TransformerModel {
    TransformerConfig cfg;
    int assets = 0;
    Matrix w_in, b_in;  // n x d_model, 1 x d_model
    std::vector<TransformerLayer> layers;
    Matrix w_head, b_head;  // d_model x n, 1 x n
    Matrix pe;              // window x d_model, fixed
    Scaler scaler;          // input standardizer (targets stay raw)

    ParamPack params() {
        ParamPack p;
        p.add(&w_in);
        p.add(&b_in);
        for (auto& l : layers) {
            for (auto& m : l.w_q) p.add(&m);
            for (auto& m : l.w_k) p.add(&m);
            for (auto& m : l.w_v) p.add(&m);
            p.add(&l.w_o);
            p.add(&l.b_o);
            p.add(&l.ln1_gain);
            p.add(&l.ln1_bias);
            p.add(&l.ff_w1);
            p.add(&l.ff_b1);
            p.add(&l.ff_w2);
            p.add(&l.ff_b2);
            p.add(&l.ln2_gain);
            p.add(&l.ln2_bias);
        }
        p.add(&w_head);
        p.add(&b_head);
        return p;
    }
};

inline TransformerModel make_transformer(int assets, const TransformerConfig& cfg) {
    if (cfg.d_model % cfg.heads != 0)
        throw ArgumentError("transformer: d_model must be divisible by heads");
    Pcg32 rng(cfg.seed);
    auto init = [&](int r, int c) {
        Matrix m(r, c);
        const double s = 1.0 / std::sqrt(static_cast<double>(r));
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = s * rng.normal();
        return m;
    };
    TransformerModel model;
    model.cfg = cfg;
    model.assets = assets;
    model.w_in = init(assets, cfg.d_model);
    model.b_in = Matrix::Zero(1, cfg.d_model);
    for (int l = 0; l < cfg.layers; ++l) {
        TransformerLayer layer;
        for (int h = 0; h < cfg.heads; ++h) {
            layer.w_q.push_back(init(cfg.d_model, cfg.d_k()));
            layer.w_k.push_back(init(cfg.d_model, cfg.d_k()));
            layer.w_v.push_back(init(cfg.d_model, cfg.d_k()));
        }
        layer.w_o = init(cfg.d_model, cfg.d_model);
        layer.b_o = Matrix::Zero(1, cfg.d_model);
        layer.ln1_gain = Matrix::Ones(1, cfg.d_model);
        layer.ln1_bias = Matrix::Zero(1, cfg.d_model);
        layer.ff_w1 = init(cfg.d_model, cfg.d_ff);
        layer.ff_b1 = Matrix::Zero(1, cfg.d_ff);
        layer.ff_w2 = init(cfg.d_ff, cfg.d_model);
        layer.ff_b2 = Matrix::Zero(1, cfg.d_model);
        layer.ln2_gain = Matrix::Ones(1, cfg.d_model);
        layer.ln2_bias = Matrix::Zero(1, cfg.d_model);
        model.layers.push_back(std::move(layer));
    }
    model.w_head = Matrix::Zero(cfg.d_model, assets);  // untrained model forecasts 0
    model.b_head = Matrix::Zero(1, assets);
    model.pe = positional_encoding(cfg.window, cfg.d_model);
    return model;
}

namespace detail {
inline Matrix layer_norm_plain(const Matrix& x, const Matrix& gain, const Matrix& bias,
                               double eps) {
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().mean();
        out.row(r) = (((x.row(r).array() - mu) / std::sqrt(var + eps)) * gain.row(0).array() +
                      bias.row(0).array())
                         .matrix();
    }
    return out;
}
}  // namespace detail

/// Concat(head_1..head_h) W_O + b_O, heads from per-head projections of x.
inline Matrix multi_head_attention(const Matrix& x, const TransformerLayer& layer) {
    Matrix concat(x.rows(), static_cast<Eigen::Index>(layer.w_q.size()) * layer.w_q[0].cols());
    Eigen::Index at = 0;
    for (size_t h = 0; h < layer.w_q.size(); ++h) {
        const Matrix head = attention(x * layer.w_q[h], x * layer.w_k[h], x * layer.w_v[h]);
        concat.middleCols(at, head.cols()) = head;
        at += head.cols();
    }
    return ((concat * layer.w_o).rowwise() + layer.b_o.row(0)).eval();
}

/// Post-norm encoder layer: LN(x + MHA(x)), then LN(. + FF(.)).
inline Matrix encoder_layer(const Matrix& x, const TransformerLayer& layer, double ln_eps) {
    const Matrix attn = multi_head_attention(x, layer);
    const Matrix n1 = detail::layer_norm_plain(x + attn, layer.ln1_gain, layer.ln1_bias, ln_eps);
    const Matrix ff_hidden =
        (((n1 * layer.ff_w1).rowwise() + layer.ff_b1.row(0)).array().tanh()).matrix();
    const Matrix ff = ((ff_hidden * layer.ff_w2).rowwise() + layer.ff_b2.row(0)).eval();
    return detail::layer_norm_plain(n1 + ff, layer.ln2_gain, layer.ln2_bias, ln_eps);
}

/// Encoder forward over one standardized window (L x n) up to the final
/// sequence encoding (L x d_model).
inline Matrix transformer_encode(const TransformerModel& m, const Matrix& window_std,
                                 bool use_pe = true) {
    if (window_std.rows() != m.cfg.window || window_std.cols() != m.assets)
        throw ShapeError("transformer_encode: window must be L x assets");
    Matrix z = ((window_std * m.w_in).rowwise() + m.b_in.row(0)).eval();
    if (use_pe) z += m.pe;
    for (const auto& layer : m.layers) z = encoder_layer(z, layer, m.cfg.ln_eps);
    return z;
}

/// Next-day expected returns in raw units from a raw return window (L x n).
inline ExpectedReturns forecast_returns(const TransformerModel& m,
                                        const std::vector<std::string>& tickers,
                                        const Matrix& window_raw) {
    if (window_raw.rows() != m.cfg.window)
        throw ArgumentError("forecast_returns: window must hold exactly L rows");
    const Matrix window_std = apply_standardizer(window_raw, m.scaler);
    const Matrix z = transformer_encode(m, window_std);
    const Vector mu =
        ((z.row(z.rows() - 1) * m.w_head).row(0) + m.b_head.row(0)).transpose();
    return ExpectedReturns{tickers, mu};
}

namespace detail {

struct TransformerVarMap {
    ad::Var w_in, b_in;
    struct Layer {
        std::vector<ad::Var> w_q, w_k, w_v;
        ad::Var w_o, b_o, ln1_g, ln1_b, ff_w1, ff_b1, ff_w2, ff_b2, ln2_g, ln2_b;
    };
    std::vector<Layer> layers;
    ad::Var w_head, b_head;
};

inline TransformerVarMap map_transformer_vars(const TransformerConfig& cfg,
                                              const std::vector<ad::Var>& vars) {
    TransformerVarMap m;
    size_t k = 0;
    m.w_in = vars[k++];
    m.b_in = vars[k++];
    for (int l = 0; l < cfg.layers; ++l) {
        TransformerVarMap::Layer lay;
        for (int h = 0; h < cfg.heads; ++h) lay.w_q.push_back(vars[k++]);
        for (int h = 0; h < cfg.heads; ++h) lay.w_k.push_back(vars[k++]);
        for (int h = 0; h < cfg.heads; ++h) lay.w_v.push_back(vars[k++]);
        lay.w_o = vars[k++];
        lay.b_o = vars[k++];
        lay.ln1_g = vars[k++];
        lay.ln1_b = vars[k++];
        lay.ff_w1 = vars[k++];
        lay.ff_b1 = vars[k++];
        lay.ff_w2 = vars[k++];
        lay.ff_b2 = vars[k++];
        lay.ln2_g = vars[k++];
        lay.ln2_b = vars[k++];
        m.layers.push_back(std::move(lay));
    }
    m.w_head = vars[k++];
    m.b_head = vars[k++];
    return m;
}

/// Taped mirror of transformer_encode + prediction head for one window.
inline ad::Var transformer_predict_taped(ad::Tape& tape, const TransformerModel& model,
                                         const TransformerVarMap& vm, const Matrix& window_std) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(model.cfg.d_k()));
    ad::Var z = ad::add(ad::add_rowvec(ad::matmul(tape.constant(window_std), vm.w_in), vm.b_in),
                        tape.constant(model.pe));
    for (const auto& lay : vm.layers) {
        std::vector<ad::Var> heads;
        for (size_t h = 0; h < lay.w_q.size(); ++h) {
            ad::Var q = ad::matmul(z, lay.w_q[h]);
            ad::Var k = ad::matmul(z, lay.w_k[h]);
            ad::Var v = ad::matmul(z, lay.w_v[h]);
            ad::Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), scale);
            heads.push_back(ad::matmul(ad::softmax_rows(scores), v));
        }
        ad::Var mha = ad::add_rowvec(ad::matmul(ad::concat_cols(heads), lay.w_o), lay.b_o);
        ad::Var n1 = ad::layer_norm_rows(ad::add(z, mha), lay.ln1_g, lay.ln1_b, model.cfg.ln_eps);
        ad::Var ff = ad::add_rowvec(
            ad::matmul(ad::tanh(ad::add_rowvec(ad::matmul(n1, lay.ff_w1), lay.ff_b1)), lay.ff_w2),
            lay.ff_b2);
        z = ad::layer_norm_rows(ad::add(n1, ff), lay.ln2_g, lay.ln2_b, model.cfg.ln_eps);
    }
    ad::Var last = ad::slice_rows(z, model.cfg.window - 1, 1);
    return ad::add_rowvec(ad::matmul(last, vm.w_head), vm.b_head);
}

}  // namespace detail

struct TransformerTraining {
    TransformerModel model;
    std::vector<double> train_mse;  // per epoch
    std::vector<double> val_mse;    // per epoch
};

/// Sliding-window next-day MSE, minibatch Adam (batch 64), early stop on the
/// validation MSE over the last 10% of training windows. Deterministic for a
/// fixed seed.
inline TransformerTraining train_transformer(const ReturnPanel& train,
                                             const TransformerConfig& cfg) {
    const int L = cfg.window;
    if (train.days() < 5 * L)
        throw TrainingError("transformer: need at least 5*L training days");
    TransformerModel model = make_transformer(train.assets(), cfg);
    model.scaler = fit_return_scaler(train);
    {
        // break the zero-head symmetry so training can move
        Pcg32 rng(cfg.seed ^ 0x7177u);
        const double s = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
        for (Eigen::Index r = 0; r < model.w_head.rows(); ++r)
            for (Eigen::Index c = 0; c < model.w_head.cols(); ++c)
                model.w_head(r, c) = s * rng.normal();
    }
    const Matrix x_std = apply_standardizer(train.returns, model.scaler);

    const int total_windows = train.days() - L;
    const int val_count = std::max(1, total_windows / 10);
    const int train_count = total_windows - val_count;
    if (train_count < 1) throw TrainingError("transformer: not enough windows");

    ParamPack pack = model.params();
    Vector flat = pack.flatten();
    AdamState opt;
    Pcg32 shuffle_rng(cfg.seed ^ 0x5eedu);
    constexpr int kBatch = 64;

    auto window_loss = [&](ad::Tape& tape, const detail::TransformerVarMap& vm, int s) {
        const Matrix win = x_std.middleRows(s, L);
        const Matrix target = train.returns.row(s + L);
        ad::Var pred = detail::transformer_predict_taped(tape, model, vm, win);
        return ad::sum_all(ad::square(ad::sub(pred, tape.constant(target))));
    };
    auto eval_mse = [&](int begin, int count) {
        double total = 0.0;
        for (int s = begin; s < begin + count; ++s) {
            const Matrix win = x_std.middleRows(s, L);
            const Matrix z = transformer_encode(model, win);
            const Eigen::RowVectorXd pred =
                (z.row(L - 1) * model.w_head) + model.b_head.row(0);
            total += (pred - train.returns.row(s + L)).squaredNorm();
        }
        return total / (static_cast<double>(count) * model.assets);
    };

    TransformerTraining out;
    Vector best_flat = flat;
    double best_val = std::numeric_limits<double>::infinity();
    int stale_epochs = 0;

    std::vector<int> order(static_cast<size_t>(train_count));
    for (int i = 0; i < train_count; ++i) order[static_cast<size_t>(i)] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = train_count - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)],
                      order[shuffle_rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);
        for (int at = 0; at < train_count; at += kBatch) {
            const int bsz = std::min(kBatch, train_count - at);
            pack.assign(flat);
            ad::Tape tape;
            ad::Var p = tape.param(flat.transpose());
            auto vm = detail::map_transformer_vars(cfg, pack.tape_views(tape, p));
            ad::Var total = tape.constant(Matrix::Zero(1, 1));
            for (int b = 0; b < bsz; ++b)
                total = ad::add(total, window_loss(tape, vm, order[static_cast<size_t>(at + b)]));
            ad::Var loss = ad::scale(total, 1.0 / (static_cast<double>(bsz) * model.assets));
            if (!std::isfinite(tape.value(loss)(0, 0)))
                throw TrainingError("transformer diverged at epoch " + std::to_string(epoch));
            tape.backward(loss);
            adam_step(flat, tape.grad(p).row(0).transpose(), opt, cfg.lr);
        }
        pack.assign(flat);
        out.train_mse.push_back(eval_mse(0, train_count));
        out.val_mse.push_back(eval_mse(train_count, val_count));
        if (out.val_mse.back() < best_val) {
            best_val = out.val_mse.back();
            best_flat = flat;
            stale_epochs = 0;
        } else if (++stale_epochs >= 3) {
            break;
        }
    }
    pack.assign(best_flat);
    out.model = std::move(model);
    return out;
}

// --- container round trip -------------------------------------------------

inline ParamContainer to_container(const TransformerModel& m) {
    ParamContainer c;
    c.model = "tf";
    c.layer_sizes = {m.assets, m.cfg.d_model, m.cfg.d_ff, m.assets};
    c.tensors["in.w"] = m.w_in;
    c.tensors["in.b"] = m.b_in;
    for (size_t l = 0; l < m.layers.size(); ++l) {
        const auto& lay = m.layers[l];
        const std::string p = "layer" + std::to_string(l) + ".";
        for (size_t h = 0; h < lay.w_q.size(); ++h) {
            c.tensors[p + "q" + std::to_string(h)] = lay.w_q[h];
            c.tensors[p + "k" + std::to_string(h)] = lay.w_k[h];
            c.tensors[p + "v" + std::to_string(h)] = lay.w_v[h];
        }
        c.tensors[p + "o.w"] = lay.w_o;
        c.tensors[p + "o.b"] = lay.b_o;
        c.tensors[p + "ln1.g"] = lay.ln1_gain;
        c.tensors[p + "ln1.b"] = lay.ln1_bias;
        c.tensors[p + "ff.w1"] = lay.ff_w1;
        c.tensors[p + "ff.b1"] = lay.ff_b1;
        c.tensors[p + "ff.w2"] = lay.ff_w2;
        c.tensors[p + "ff.b2"] = lay.ff_b2;
        c.tensors[p + "ln2.g"] = lay.ln2_gain;
        c.tensors[p + "ln2.b"] = lay.ln2_bias;
    }
    c.tensors["head.w"] = m.w_head;
    c.tensors["head.b"] = m.b_head;
    c.config["window"] = m.cfg.window;
    c.config["d_model"] = m.cfg.d_model;
    c.config["heads"] = m.cfg.heads;
    c.config["layers"] = m.cfg.layers;
    c.config["d_ff"] = m.cfg.d_ff;
    c.config["epochs"] = m.cfg.epochs;
    c.config["lr"] = m.cfg.lr;
    c.config["seed"] = static_cast<double>(m.cfg.seed);
    c.config["ln_eps"] = m.cfg.ln_eps;
    c.config["assets"] = m.assets;
    c.scaler = m.scaler;
    return c;
}

inline TransformerModel transformer_from_container(const ParamContainer& c) {
    if (c.model != "tf") throw ParseError("container is not a transformer model");
    TransformerConfig cfg;
    cfg.window = static_cast<int>(c.config.at("window"));
    cfg.d_model = static_cast<int>(c.config.at("d_model"));
    cfg.heads = static_cast<int>(c.config.at("heads"));
    cfg.layers = static_cast<int>(c.config.at("layers"));
    cfg.d_ff = static_cast<int>(c.config.at("d_ff"));
    cfg.epochs = static_cast<int>(c.config.at("epochs"));
    cfg.lr = c.config.at("lr");
    cfg.seed = static_cast<std::uint64_t>(c.config.at("seed"));
    cfg.ln_eps = c.config.at("ln_eps");
    TransformerModel m = make_transformer(static_cast<int>(c.config.at("assets")), cfg);
    m.w_in = c.tensors.at("in.w");
    m.b_in = c.tensors.at("in.b");
    for (size_t l = 0; l < m.layers.size(); ++l) {
        auto& lay = m.layers[l];
        const std::string p = "layer" + std::to_string(l) + ".";
        for (size_t h = 0; h < lay.w_q.size(); ++h) {
            lay.w_q[h] = c.tensors.at(p + "q" + std::to_string(h));
            lay.w_k[h] = c.tensors.at(p + "k" + std::to_string(h));
            lay.w_v[h] = c.tensors.at(p + "v" + std::to_string(h));
        }
        lay.w_o = c.tensors.at(p + "o.w");
        lay.b_o = c.tensors.at(p + "o.b");
        lay.ln1_gain = c.tensors.at(p + "ln1.g");
        lay.ln1_bias = c.tensors.at(p + "ln1.b");
        lay.ff_w1 = c.tensors.at(p + "ff.w1");
        lay.ff_b1 = c.tensors.at(p + "ff.b1");
        lay.ff_w2 = c.tensors.at(p + "ff.w2");
        lay.ff_b2 = c.tensors.at(p + "ff.b2");
        lay.ln2_gain = c.tensors.at(p + "ln2.g");
        lay.ln2_bias = c.tensors.at(p + "ln2.b");
    }
    m.w_head = c.tensors.at("head.w");
    m.b_head = c.tensors.at("head.b");
    m.scaler = c.scaler;
    return m;
}

}  // namespace portlab
