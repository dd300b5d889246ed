#pragma once

#include <optional>
#include <string>
#include <vector>

#include "portlab/models/autoencoder.hpp"
#include "portlab/models/net.hpp"
#include "portlab/models/params_io.hpp"
#include "portlab/numerics/adam.hpp"

namespace portlab {

struct EnvConfig {
    int window = 30;          // W trailing days in the state
    double cost_rate = 0.0;   // fraction per unit one-way turnover
    double gamma = 0.99;
    int episode_length = 126;
    double cap = 1.0;         // weight cap applied to actions
};

/// Historical-replay environment: the state at time t is the standardized
/// return window [t-W, t), the current weights, and (for the hybrid) the
/// latent code of day t-1. Acting at t earns the raw return row t.
struct PortfolioEnv {
    EnvConfig cfg;
    ReturnPanel panel;       // raw returns
    Matrix std_returns;      // standardized with the training scaler
    Scaler scaler;
    std::optional<Matrix> latent;  // per-day standardized codes z_t, aligned to rows

    int assets() const { return panel.assets(); }
    int latent_dim() const { return latent ? static_cast<int>(latent->cols()) : 0; }
    int first_start() const { return cfg.window; }
    int last_start() const { return panel.days() - cfg.episode_length; }
    int state_dim() const { return cfg.window * assets() + assets() + latent_dim(); }
};

struct EnvState {
    Matrix window;   // W x n standardized returns
    Vector weights;  // previous target weights
    Vector latent;   // empty when the hybrid block is off
    int t = 0;       // index of the next return row to be earned
    bool done = false;
};

inline PortfolioEnv make_env(const ReturnPanel& panel, const Scaler& scaler, const EnvConfig& cfg,
                             std::optional<Matrix> latent = std::nullopt) {
    if (panel.days() < cfg.window + cfg.episode_length)
        throw ArgumentError("env: panel shorter than window + episode length");
    PortfolioEnv env;
    env.cfg = cfg;
    env.panel = panel;
    env.scaler = scaler;
    env.std_returns = apply_standardizer(panel.returns, scaler);
    if (latent) {
        if (latent->rows() != panel.days())
            throw ShapeError("env: latent series must align with the return rows");
        env.latent = std::move(latent);
    }
    return env;
}

inline Vector state_features(const PortfolioEnv& env, const EnvState& s) {
    Vector x(env.state_dim());
    int at = 0;
    for (Eigen::Index r = 0; r < s.window.rows(); ++r)
        for (Eigen::Index c = 0; c < s.window.cols(); ++c) x[at++] = s.window(r, c);
    for (Eigen::Index i = 0; i < s.weights.size(); ++i) x[at++] = s.weights[i];
    for (Eigen::Index i = 0; i < s.latent.size(); ++i) x[at++] = s.latent[i];
    return x;
}

inline EnvState env_reset(const PortfolioEnv& env, int start) {
    if (start < env.first_start() || start > env.last_start())
        throw ArgumentError("env_reset: start index leaves too little history or horizon");
    EnvState s;
    s.window = env.std_returns.middleRows(start - env.cfg.window, env.cfg.window);
    s.weights = Vector::Constant(env.assets(), 1.0 / env.assets());
    if (env.latent) s.latent = env.latent->row(start - 1).transpose();
    s.t = start;
    return s;
}

struct StepResult {
    EnvState next;
    double reward = 0.0;
    bool done = false;
    Vector weights;   // the realized allocation for the step
    double turnover = 0.0;
};

/// Logits -> softmax -> cap projection; reward is the net log return
/// ln(1 + w.r - cost_rate * turnover).
inline StepResult env_step(const PortfolioEnv& env, const EnvState& s, const Vector& logits,
                           int episode_start) {
    if (s.done) throw ArgumentError("env_step: episode already finished");
    if (!logits.allFinite()) throw NumericError("env_step: non-finite action logits");
    if (logits.size() != env.assets()) throw ShapeError("env_step: one logit per asset");

    Vector w = softmax(logits);
    if (w.maxCoeff() > env.cfg.cap) w = project_capped_simplex(w, env.cfg.cap);

    StepResult out;
    out.turnover = (w - s.weights).lpNorm<1>();
    const double gross = w.dot(env.panel.returns.row(s.t).transpose());
    const double net = gross - env.cfg.cost_rate * out.turnover;
    if (net <= -1.0) throw NumericError("env_step: portfolio wiped out");
    out.reward = std::log1p(net);
    out.weights = w;

    out.next.t = s.t + 1;
    out.next.weights = w;
    out.done = (out.next.t - episode_start) >= env.cfg.episode_length;
    out.next.done = out.done;
    if (!out.done) {
        out.next.window = env.std_returns.middleRows(out.next.t - env.cfg.window, env.cfg.window);
        if (env.latent) out.next.latent = env.latent->row(out.next.t - 1).transpose();
    }
    return out;
}

// ---------------------------------------------------------------------------
// agent
// ---------------------------------------------------------------------------

struct DrlConfig {
    EnvConfig env;
    int hidden = 64;          // two hidden layers each for policy and value
    double gamma = 0.99;
    double lambda = 0.95;
    double clip = 0.2;
    int update_epochs = 10;
    int minibatch = 64;
    double lr = 3e-4;
    int iterations = 200;
    int episodes_per_iter = 4;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    std::uint64_t seed = 0;
};

/// Gaussian policy over action logits plus a state-value head.
struct AgentParams {
    Mlp policy;     // state -> n mean logits
    Mlp value;      // state -> scalar
    Matrix log_std;  // 1 x n

    ParamPack pack() {
        ParamPack p;
        policy.register_params(p);
        value.register_params(p);
        p.add(&log_std);
        return p;
    }
};

inline AgentParams make_agent(int state_dim, int assets, int hidden, Pcg32& rng) {
    AgentParams a;
    a.policy = Mlp::make({state_dim, hidden, hidden, assets}, Activation::Tanh, rng);
    a.value = Mlp::make({state_dim, hidden, hidden, 1}, Activation::Tanh, rng);
    a.log_std = Matrix::Constant(1, assets, -0.5);
    return a;
}

inline double gaussian_log_prob(const Vector& action, const Vector& mean, const Vector& log_std) {
    constexpr double kLog2Pi = 1.8378770664093454836;
    double lp = 0.0;
    for (Eigen::Index i = 0; i < action.size(); ++i) {
        const double sd = std::exp(log_std[i]);
        const double z = (action[i] - mean[i]) / sd;
        lp += -0.5 * z * z - log_std[i] - 0.5 * kLog2Pi;
    }
    return lp;
}

struct ActionSample {
    Vector logits;
    double log_prob = 0.0;
};

/// Deterministic mode returns the mean logits; explore mode samples a
/// Gaussian around them with the learned per-asset log-std.
inline ActionSample policy_act(const AgentParams& agent, const PortfolioEnv& env,
                               const EnvState& s, Pcg32& rng, bool explore) {
    const Vector x = state_features(env, s);
    const Vector mean = agent.policy.forward(x.transpose()).row(0).transpose();
    const Vector log_std = agent.log_std.row(0).transpose();
    ActionSample out;
    if (explore) {
        out.logits.resize(mean.size());
        for (Eigen::Index i = 0; i < mean.size(); ++i)
            out.logits[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
    } else {
        out.logits = mean;
    }
    out.log_prob = gaussian_log_prob(out.logits, mean, log_std);
    return out;
}

inline double estimate_value(const AgentParams& agent, const PortfolioEnv& env,
                             const EnvState& s) {
    return agent.value.forward(state_features(env, s).transpose())(0, 0);
}

/// One collected episode.
struct Trajectory {
    std::vector<Vector> states;    // feature vectors
    std::vector<Vector> actions;   // sampled logits
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<double> log_probs;
    double bootstrap_value = 0.0;  // V(s_T); zero at hard terminals

    int steps() const { return static_cast<int>(rewards.size()); }
};

struct Advantages {
    Vector advantages;
    Vector returns_to_go;
};

/// GAE(gamma, lambda); returns-to-go are advantages + value estimates.
inline Advantages compute_advantages(const Trajectory& traj, double gamma, double lambda) {
    const int n = traj.steps();
    if (n == 0) throw ArgumentError("compute_advantages: empty trajectory");
    Advantages out;
    out.advantages.resize(n);
    out.returns_to_go.resize(n);
    double gae = 0.0;
    for (int t = n - 1; t >= 0; --t) {
        const double next_value = (t + 1 < n) ? traj.values[static_cast<size_t>(t + 1)]
                                              : traj.bootstrap_value;
        const double delta =
            traj.rewards[static_cast<size_t>(t)] + gamma * next_value - traj.values[static_cast<size_t>(t)];
        gae = delta + gamma * lambda * gae;
        out.advantages[t] = gae;
        out.returns_to_go[t] = gae + traj.values[static_cast<size_t>(t)];
    }
    return out;
}

struct PpoDiagnostics {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double mean_ratio = 0.0;
    double clip_fraction = 0.0;
    double mean_reward = 0.0;
};

namespace detail {

struct PpoBatch {
    Matrix states;     // B x m
    Matrix actions;    // B x n
    Vector log_probs;  // old log-probs
    Vector advantages;  // normalized
    Vector returns;
};

inline PpoBatch assemble_batch(const std::vector<Trajectory>& trajs, const DrlConfig& cfg) {
    int total = 0;
    for (const auto& t : trajs) total += t.steps();
    if (total == 0) throw ArgumentError("ppo_update: no steps collected");
    const int m = static_cast<int>(trajs.front().states.front().size());
    const int n = static_cast<int>(trajs.front().actions.front().size());
    PpoBatch b;
    b.states.resize(total, m);
    b.actions.resize(total, n);
    b.log_probs.resize(total);
    b.advantages.resize(total);
    b.returns.resize(total);
    int at = 0;
    for (const auto& t : trajs) {
        const Advantages adv = compute_advantages(t, cfg.gamma, cfg.lambda);
        for (int i = 0; i < t.steps(); ++i) {
            b.states.row(at) = t.states[static_cast<size_t>(i)].transpose();
            b.actions.row(at) = t.actions[static_cast<size_t>(i)].transpose();
            b.log_probs[at] = t.log_probs[static_cast<size_t>(i)];
            b.advantages[at] = adv.advantages[i];
            b.returns[at] = adv.returns_to_go[i];
            ++at;
        }
    }
    // normalize advantages over the update batch
    const double mean = b.advantages.mean();
    const double sd = std::sqrt((b.advantages.array() - mean).square().sum() /
                                std::max(1, total - 1));
    b.advantages = (b.advantages.array() - mean) / (sd + 1e-8);
    return b;
}

/// Taped PPO loss on a minibatch: clipped surrogate + value MSE - entropy.
inline ad::Var ppo_loss_taped(ad::Tape& tape, const AgentParams& agent, const DrlConfig& cfg,
                              const std::vector<ad::Var>& vars, const Matrix& states,
                              const Matrix& actions, const Vector& logp_old, const Vector& adv,
                              const Vector& rets) {
    const int n = static_cast<int>(actions.cols());
    const size_t policy_off = 0;
    const size_t value_off = static_cast<size_t>(2 * agent.policy.layers());
    const size_t logstd_idx = value_off + static_cast<size_t>(2 * agent.value.layers());

    ad::Var x = tape.constant(states);
    ad::Var mean = agent.policy.forward(tape, x, vars, policy_off);
    ad::Var log_std = vars[logstd_idx];

    // per-row Gaussian log-prob of the stored actions under the new params
    ad::Var diff = ad::sub(tape.constant(actions), mean);
    ad::Var inv_sd = ad::exp(ad::neg(log_std));
    ad::Var zscore = ad::mul_rowvec(diff, inv_sd);
    ad::Var quad = ad::scale(ad::rowwise_sum(ad::square(zscore)), -0.5);
    ad::Var sum_log_std = ad::sum_all(log_std);
    constexpr double kLog2Pi = 1.8378770664093454836;
    ad::Var logp_new =
        ad::add_scalar(ad::add_bcast(quad, ad::neg(sum_log_std)), -0.5 * kLog2Pi * n);

    ad::Var ratio = ad::exp(ad::sub(logp_new, tape.constant(logp_old)));
    ad::Var adv_c = tape.constant(adv);
    ad::Var surr = ad::min_elem(ad::hadamard(ratio, adv_c),
                                ad::hadamard(ad::clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), adv_c));
    ad::Var policy_loss = ad::neg(ad::mean_all(surr));

    ad::Var v = agent.value.forward(tape, x, vars, value_off);
    ad::Var value_loss = ad::mean_all(ad::square(ad::sub(v, tape.constant(rets))));

    // diag-Gaussian entropy depends only on the log-std parameters
    ad::Var entropy = ad::add_scalar(ad::sum_all(log_std), 0.5 * n * (1.0 + kLog2Pi));

    return ad::add(policy_loss,
                   ad::sub(ad::scale(value_loss, cfg.value_coef),
                           ad::scale(entropy, cfg.entropy_coef)));
}

}  // namespace detail

/// K epochs of shuffled-minibatch Adam on the clipped objective.
inline PpoDiagnostics ppo_update(AgentParams& agent, const std::vector<Trajectory>& trajs,
                                 const DrlConfig& cfg, Pcg32& rng, AdamState& opt) {
    detail::PpoBatch batch = detail::assemble_batch(trajs, cfg);
    const int total = static_cast<int>(batch.states.rows());

    ParamPack pack = agent.pack();
    Vector flat = pack.flatten();

    std::vector<int> order(static_cast<size_t>(total));
    for (int i = 0; i < total; ++i) order[static_cast<size_t>(i)] = i;

    for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
        for (int i = total - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)],
                      order[rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);
        for (int at = 0; at < total; at += cfg.minibatch) {
            const int bsz = std::min(cfg.minibatch, total - at);
            Matrix states(bsz, batch.states.cols());
            Matrix actions(bsz, batch.actions.cols());
            Vector logp(bsz), adv(bsz), rets(bsz);
            for (int b = 0; b < bsz; ++b) {
                const int src = order[static_cast<size_t>(at + b)];
                states.row(b) = batch.states.row(src);
                actions.row(b) = batch.actions.row(src);
                logp[b] = batch.log_probs[src];
                adv[b] = batch.advantages[src];
                rets[b] = batch.returns[src];
            }
            pack.assign(flat);
            ad::Tape tape;
            ad::Var p = tape.param(flat.transpose());
            auto vars = pack.tape_views(tape, p);
            ad::Var loss = detail::ppo_loss_taped(tape, agent, cfg, vars, states, actions, logp,
                                                  adv, rets);
            if (!std::isfinite(tape.value(loss)(0, 0)))
                throw TrainingError("ppo_update: non-finite loss");
            tape.backward(loss);
            adam_step(flat, tape.grad(p).row(0).transpose(), opt, cfg.lr);
        }
    }
    pack.assign(flat);

    // diagnostics from a full-batch pass at the updated params
    PpoDiagnostics diag;
    {
        pack.assign(flat);
        ad::Tape tape;
        ad::Var p = tape.param(flat.transpose());
        auto vars = pack.tape_views(tape, p);
        ad::Var mean = agent.policy.forward(tape, tape.constant(batch.states), vars, 0);
        const Matrix& mu = tape.value(mean);
        double ratio_sum = 0.0;
        int clipped = 0;
        const Vector log_std = agent.log_std.row(0).transpose();
        for (int i = 0; i < total; ++i) {
            const double lp = gaussian_log_prob(batch.actions.row(i).transpose(),
                                                mu.row(i).transpose(), log_std);
            const double ratio = std::exp(lp - batch.log_probs[i]);
            ratio_sum += ratio;
            if (std::abs(ratio - 1.0) > cfg.clip) ++clipped;
        }
        diag.mean_ratio = ratio_sum / total;
        diag.clip_fraction = static_cast<double>(clipped) / total;
    }
    double reward_sum = 0.0;
    int reward_count = 0;
    for (const auto& t : trajs) {
        for (const double r : t.rewards) reward_sum += r;
        reward_count += t.steps();
    }
    diag.mean_reward = reward_count ? reward_sum / reward_count : 0.0;
    diag.entropy = agent.log_std.sum() +
                   0.5 * agent.log_std.cols() * (1.0 + 1.8378770664093454836);
    return diag;
}

/// Plain (untaped) PPO surrogate for a forced ratio; used as a test oracle
/// anchor: with old == new params the surrogate equals the mean advantage.
inline double ppo_surrogate(const Vector& ratio, const Vector& advantages, double clip) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < ratio.size(); ++i) {
        const double clipped = std::clamp(ratio[i], 1.0 - clip, 1.0 + clip);
        acc += std::min(ratio[i] * advantages[i], clipped * advantages[i]);
    }
    return acc / static_cast<double>(ratio.size());
}

struct DrlModel {
    DrlConfig cfg;
    AgentParams agent;
    Scaler scaler;
    Scaler z_scaler;  // standardizes autoencoder codes in the hybrid state
    bool uses_latent = false;
    int state_dim = 0;
    std::vector<PpoDiagnostics> history;
};

inline Trajectory collect_episode(const PortfolioEnv& env, const AgentParams& agent, int start,
                                  Pcg32& rng, bool explore = true) {
    Trajectory traj;
    EnvState s = env_reset(env, start);
    while (true) {
        const Vector x = state_features(env, s);
        ActionSample act = policy_act(agent, env, s, rng, explore);
        const double value = agent.value.forward(x.transpose())(0, 0);
        StepResult step = env_step(env, s, act.logits, start);
        traj.states.push_back(x);
        traj.actions.push_back(act.logits);
        traj.rewards.push_back(step.reward);
        traj.values.push_back(value);
        traj.log_probs.push_back(act.log_prob);
        if (step.done) {
            traj.bootstrap_value = 0.0;  // fixed-horizon terminal
            break;
        }
        s = std::move(step.next);
    }
    return traj;
}

/// PPO training over random episode starts drawn from the panel. With a
/// latent source the state carries the autoencoder code of the previous day.
inline DrlModel train_drl(const ReturnPanel& panel, const DrlConfig& cfg,
                          const AutoencoderModel* latent_source = nullptr) {
    DrlModel model;
    model.cfg = cfg;
    model.scaler = fit_return_scaler(panel);

    std::optional<Matrix> latent;
    if (latent_source) {
        const Matrix x_std = apply_standardizer(panel.returns, model.scaler);
        Matrix codes = encode(*latent_source, x_std);
        std::vector<std::string> names;
        for (int j = 0; j < codes.cols(); ++j) names.push_back("z" + std::to_string(j));
        model.z_scaler = fit_standardizer(codes, names, 0, static_cast<int>(codes.rows()),
                                          Scaler::ZeroVariance::Keep);
        latent = apply_standardizer(codes, model.z_scaler);
        model.uses_latent = true;
    }

    PortfolioEnv env = make_env(panel, model.scaler, cfg.env, std::move(latent));
    Pcg32 rng(cfg.seed);
    AgentParams agent = make_agent(env.state_dim(), env.assets(), cfg.hidden, rng);
    model.state_dim = env.state_dim();

    AdamState opt;
    const int start_lo = env.first_start();
    const int start_hi = env.last_start();
    if (start_hi < start_lo) throw TrainingError("train_drl: panel too short for an episode");

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        std::vector<Trajectory> trajs;
        for (int e = 0; e < cfg.episodes_per_iter; ++e) {
            const int start =
                start_lo + static_cast<int>(rng.uniform_int(
                               static_cast<std::uint64_t>(start_hi - start_lo + 1)));
            trajs.push_back(collect_episode(env, agent, start, rng, true));
        }
        model.history.push_back(ppo_update(agent, trajs, cfg, rng, opt));
    }
    model.agent = std::move(agent);
    return model;
}

// --- container round trip -------------------------------------------------

inline ParamContainer to_container(const DrlModel& m, const std::string& name) {
    ParamContainer c;
    c.model = name;  // "drl" | "ae_drl"
    c.layer_sizes = {m.state_dim, m.cfg.hidden, m.cfg.hidden,
                     static_cast<int>(m.agent.log_std.cols())};
    for (int i = 0; i < m.agent.policy.layers(); ++i) {
        c.tensors["pi.w" + std::to_string(i)] = m.agent.policy.w[static_cast<size_t>(i)];
        c.tensors["pi.b" + std::to_string(i)] = m.agent.policy.b[static_cast<size_t>(i)];
    }
    for (int i = 0; i < m.agent.value.layers(); ++i) {
        c.tensors["vf.w" + std::to_string(i)] = m.agent.value.w[static_cast<size_t>(i)];
        c.tensors["vf.b" + std::to_string(i)] = m.agent.value.b[static_cast<size_t>(i)];
    }
    c.tensors["log_std"] = m.agent.log_std;
    c.config["window"] = m.cfg.env.window;
    c.config["cost_rate"] = m.cfg.env.cost_rate;
    c.config["episode_length"] = m.cfg.env.episode_length;
    c.config["cap"] = m.cfg.env.cap;
    c.config["hidden"] = m.cfg.hidden;
    c.config["gamma"] = m.cfg.gamma;
    c.config["lambda"] = m.cfg.lambda;
    c.config["clip"] = m.cfg.clip;
    c.config["update_epochs"] = m.cfg.update_epochs;
    c.config["minibatch"] = m.cfg.minibatch;
    c.config["lr"] = m.cfg.lr;
    c.config["iterations"] = m.cfg.iterations;
    c.config["episodes_per_iter"] = m.cfg.episodes_per_iter;
    c.config["seed"] = static_cast<double>(m.cfg.seed);
    c.config["uses_latent"] = m.uses_latent ? 1.0 : 0.0;
    c.config["state_dim"] = m.state_dim;
    c.scaler = m.scaler;
    if (m.uses_latent) {
        Matrix zs(2, m.z_scaler.dims());
        zs.row(0) = m.z_scaler.mean.transpose();
        zs.row(1) = m.z_scaler.stddev.transpose();
        c.tensors["z_scaler"] = zs;
    }
    return c;
}

inline DrlModel drl_from_container(const ParamContainer& c) {
    if (c.model != "drl" && c.model != "ae_drl")
        throw ParseError("container is not a drl agent");
    DrlModel m;
    m.cfg.env.window = static_cast<int>(c.config.at("window"));
    m.cfg.env.cost_rate = c.config.at("cost_rate");
    m.cfg.env.episode_length = static_cast<int>(c.config.at("episode_length"));
    m.cfg.env.cap = c.config.at("cap");
    m.cfg.hidden = static_cast<int>(c.config.at("hidden"));
    m.cfg.gamma = c.config.at("gamma");
    m.cfg.lambda = c.config.at("lambda");
    m.cfg.clip = c.config.at("clip");
    m.cfg.update_epochs = static_cast<int>(c.config.at("update_epochs"));
    m.cfg.minibatch = static_cast<int>(c.config.at("minibatch"));
    m.cfg.lr = c.config.at("lr");
    m.cfg.iterations = static_cast<int>(c.config.at("iterations"));
    m.cfg.episodes_per_iter = static_cast<int>(c.config.at("episodes_per_iter"));
    m.cfg.seed = static_cast<std::uint64_t>(c.config.at("seed"));
    m.uses_latent = c.config.at("uses_latent") == 1.0;
    m.state_dim = static_cast<int>(c.config.at("state_dim"));

    const int n = static_cast<int>(c.tensors.at("log_std").cols());
    m.agent.policy = Mlp::zeros({m.state_dim, m.cfg.hidden, m.cfg.hidden, n}, Activation::Tanh);
    m.agent.value = Mlp::zeros({m.state_dim, m.cfg.hidden, m.cfg.hidden, 1}, Activation::Tanh);
    for (int i = 0; i < m.agent.policy.layers(); ++i) {
        m.agent.policy.w[static_cast<size_t>(i)] = c.tensors.at("pi.w" + std::to_string(i));
        m.agent.policy.b[static_cast<size_t>(i)] = c.tensors.at("pi.b" + std::to_string(i));
    }
    for (int i = 0; i < m.agent.value.layers(); ++i) {
        m.agent.value.w[static_cast<size_t>(i)] = c.tensors.at("vf.w" + std::to_string(i));
        m.agent.value.b[static_cast<size_t>(i)] = c.tensors.at("vf.b" + std::to_string(i));
    }
    m.agent.log_std = c.tensors.at("log_std");
    m.scaler = c.scaler;
    if (m.uses_latent) {
        const Matrix& zs = c.tensors.at("z_scaler");
        m.z_scaler.mean = zs.row(0).transpose();
        m.z_scaler.stddev = zs.row(1).transpose();
        for (int j = 0; j < zs.cols(); ++j) {
            m.z_scaler.columns.push_back("z" + std::to_string(j));
            m.z_scaler.kept_indices.push_back(j);
        }
    }
    return m;
}

}  // namespace portlab
