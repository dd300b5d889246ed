#pragma once

#include <string>
#include <vector>

#include "portlab/classical/covariance.hpp"
#include "portlab/data/features.hpp"
#include "portlab/models/net.hpp"
#include "portlab/models/params_io.hpp"
#include "portlab/numerics/adam.hpp"

namespace portlab {

struct AutoencoderConfig {
    int latent_dim = 3;
    int hidden = 16;  // 0 = single linear layer each side
    int epochs = 200;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    Activation activation = Activation::Tanh;  // hidden layers; ends are linear
};

/// Encoder d -> hidden -> k and decoder k -> hidden -> d over one day's
/// cross-sectional standardized return vector. The latent and output layers
/// are linear.
struct AutoencoderModel {
    AutoencoderConfig cfg;
    int input_dim = 0;
    Mlp encoder;
    Mlp decoder;
    Scaler scaler;  // per-asset, fitted on the training panel

    ParamPack params() {
        ParamPack pack;
        encoder.register_params(pack);
        decoder.register_params(pack);
        return pack;
    }
};

inline std::vector<int> ae_encoder_sizes(int d, const AutoencoderConfig& cfg) {
    if (cfg.hidden > 0) return {d, cfg.hidden, cfg.latent_dim};
    return {d, cfg.latent_dim};
}

inline std::vector<int> ae_decoder_sizes(int d, const AutoencoderConfig& cfg) {
    if (cfg.hidden > 0) return {cfg.latent_dim, cfg.hidden, d};
    return {cfg.latent_dim, d};
}

inline AutoencoderModel make_autoencoder(int input_dim, const AutoencoderConfig& cfg) {
    if (cfg.latent_dim >= input_dim && cfg.hidden > 0)
        throw ArgumentError("autoencoder: latent_dim must be below input_dim");
    Pcg32 rng(cfg.seed);
    AutoencoderModel m;
    m.cfg = cfg;
    m.input_dim = input_dim;
    m.encoder = Mlp::make(ae_encoder_sizes(input_dim, cfg), cfg.activation, rng);
    m.decoder = Mlp::make(ae_decoder_sizes(input_dim, cfg), cfg.activation, rng);
    return m;
}

/// Z = f_theta(X) on standardized inputs; rows are observations.
inline Matrix encode(const AutoencoderModel& m, const Matrix& x_std) {
    if (x_std.cols() != m.input_dim) throw ShapeError("encode: input width mismatch");
    return m.encoder.forward(x_std);
}

inline Vector encode(const AutoencoderModel& m, const Vector& x_std) {
    return encode(m, Matrix(x_std.transpose())).row(0).transpose();
}

inline Matrix decode(const AutoencoderModel& m, const Matrix& z) {
    if (z.cols() != m.cfg.latent_dim) throw ShapeError("decode: latent width mismatch");
    return m.decoder.forward(z);
}

inline Vector decode(const AutoencoderModel& m, const Vector& z) {
    return decode(m, Matrix(z.transpose())).row(0).transpose();
}

/// Squared L2 reconstruction error for one observation.
inline double reconstruction_loss(const Vector& x, const Vector& xhat) {
    if (x.size() != xhat.size()) throw ShapeError("reconstruction_loss: length mismatch");
    return (x - xhat).squaredNorm();
}

struct AutoencoderTraining {
    AutoencoderModel model;
    std::vector<double> loss_history;  // mean reconstruction loss per epoch
};

/// Full-batch Adam on the mean squared reconstruction loss of standardized
/// daily return vectors. Deterministic for a fixed seed.
inline AutoencoderTraining train_autoencoder(const ReturnPanel& train,
                                             const AutoencoderConfig& cfg) {
    AutoencoderModel model = make_autoencoder(train.assets(), cfg);
    model.scaler = fit_return_scaler(train);
    const Matrix x = apply_standardizer(train.returns, model.scaler);

    ParamPack pack = model.params();
    Vector flat = pack.flatten();
    AdamState opt;
    AutoencoderTraining out;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        pack.assign(flat);
        ad::Tape tape;
        ad::Var p = tape.param(flat.transpose());
        auto vars = pack.tape_views(tape, p);
        ad::Var input = tape.constant(x);
        ad::Var z = model.encoder.forward(tape, input, vars, 0);
        ad::Var xhat = model.decoder.forward(tape, z, vars, 2 * model.encoder.layers());
        ad::Var loss =
            ad::scale(ad::sum_all(ad::square(ad::sub(input, xhat))), 1.0 / x.rows());
        const double loss_val = tape.value(loss)(0, 0);
        if (!std::isfinite(loss_val))
            throw TrainingError("autoencoder diverged at epoch " + std::to_string(epoch));
        out.loss_history.push_back(loss_val);
        tape.backward(loss);
        adam_step(flat, tape.grad(p).row(0).transpose(), opt, cfg.lr);
    }
    pack.assign(flat);
    out.model = std::move(model);
    return out;
}

/// Factor-style covariance: Cov(reconstructed series) plus the diagonal of
/// the residual variances, both in raw return units.
inline CovarianceEstimate ae_covariance(const AutoencoderModel& m, const ReturnPanel& recent) {
    if (recent.days() < 2) throw DataError("ae_covariance: need at least 2 observations");
    const Matrix x_std = apply_standardizer(recent.returns, m.scaler);
    const Matrix xhat_std = decode(m, encode(m, x_std));
    const Matrix xhat = invert_standardizer(xhat_std, m.scaler);

    const Eigen::Index T = xhat.rows();
    const Eigen::RowVectorXd mean = xhat.colwise().mean();
    const Matrix centered = xhat.rowwise() - mean;
    Matrix sigma = (centered.transpose() * centered) / static_cast<double>(T - 1);

    const Matrix resid = recent.returns - xhat;
    const Eigen::RowVectorXd rmean = resid.colwise().mean();
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
        const auto col = resid.col(i).array() - rmean[i];
        sigma(i, i) += col.square().sum() / static_cast<double>(T - 1);
    }
    sigma = 0.5 * (sigma + sigma.transpose());
    if (min_eigenvalue(sigma) < 0.0) sigma = nearest_psd(sigma, 0.0);
    return CovarianceEstimate{recent.tickers, std::move(sigma), "autoencoder"};
}

// --- container round trip -------------------------------------------------

inline ParamContainer to_container(const AutoencoderModel& m) {
    ParamContainer c;
    c.model = "ae";
    for (const int s : ae_encoder_sizes(m.input_dim, m.cfg)) c.layer_sizes.push_back(s);
    for (size_t i = 1; i < ae_decoder_sizes(m.input_dim, m.cfg).size(); ++i)
        c.layer_sizes.push_back(ae_decoder_sizes(m.input_dim, m.cfg)[i]);
    for (int i = 0; i < m.encoder.layers(); ++i) {
        c.tensors["enc.w" + std::to_string(i)] = m.encoder.w[static_cast<size_t>(i)];
        c.tensors["enc.b" + std::to_string(i)] = m.encoder.b[static_cast<size_t>(i)];
    }
    for (int i = 0; i < m.decoder.layers(); ++i) {
        c.tensors["dec.w" + std::to_string(i)] = m.decoder.w[static_cast<size_t>(i)];
        c.tensors["dec.b" + std::to_string(i)] = m.decoder.b[static_cast<size_t>(i)];
    }
    c.config["latent_dim"] = m.cfg.latent_dim;
    c.config["hidden"] = m.cfg.hidden;
    c.config["epochs"] = m.cfg.epochs;
    c.config["lr"] = m.cfg.lr;
    c.config["seed"] = static_cast<double>(m.cfg.seed);
    c.config["activation"] = m.cfg.activation == Activation::Linear ? 1.0 : 0.0;
    c.config["input_dim"] = m.input_dim;
    c.scaler = m.scaler;
    return c;
}

inline AutoencoderModel autoencoder_from_container(const ParamContainer& c) {
    if (c.model != "ae") throw ParseError("container is not an autoencoder model");
    AutoencoderConfig cfg;
    cfg.latent_dim = static_cast<int>(c.config.at("latent_dim"));
    cfg.hidden = static_cast<int>(c.config.at("hidden"));
    cfg.epochs = static_cast<int>(c.config.at("epochs"));
    cfg.lr = c.config.at("lr");
    cfg.seed = static_cast<std::uint64_t>(c.config.at("seed"));
    cfg.activation = c.config.at("activation") == 1.0 ? Activation::Linear : Activation::Tanh;
    AutoencoderModel m;
    m.cfg = cfg;
    m.input_dim = static_cast<int>(c.config.at("input_dim"));
    m.encoder = Mlp::zeros(ae_encoder_sizes(m.input_dim, cfg), cfg.activation);
    m.decoder = Mlp::zeros(ae_decoder_sizes(m.input_dim, cfg), cfg.activation);
    for (int i = 0; i < m.encoder.layers(); ++i) {
        m.encoder.w[static_cast<size_t>(i)] = c.tensors.at("enc.w" + std::to_string(i));
        m.encoder.b[static_cast<size_t>(i)] = c.tensors.at("enc.b" + std::to_string(i));
    }
    for (int i = 0; i < m.decoder.layers(); ++i) {
        m.decoder.w[static_cast<size_t>(i)] = c.tensors.at("dec.w" + std::to_string(i));
        m.decoder.b[static_cast<size_t>(i)] = c.tensors.at("dec.b" + std::to_string(i));
    }
    m.scaler = c.scaler;
    return m;
}

}  // namespace portlab
