#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "portlab/models/autoencoder.hpp"
#include "portlab/models/gnn.hpp"
#include "portlab/models/transformer.hpp"
#include "support/synthetic.hpp"

using namespace portlab;
using namespace portlab::testsupport;
namespace fs = std::filesystem;

namespace {

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

// ---------------------------------------------------------------------------
// autoencoder
// ---------------------------------------------------------------------------

TEST_CASE("autoencoder encode/decode basics") {
    SECTION("zero params give zero code and zero reconstruction") {
        AutoencoderConfig cfg;
        cfg.latent_dim = 2;
        cfg.hidden = 5;
        auto m = make_autoencoder(4, cfg);
        ParamPack pack = m.params();
        pack.assign(Vector::Zero(pack.size()));
        Vector x(4);
        x << 1, -2, 3, 0.5;
        REQUIRE(encode(m, x).isZero());
        const Vector z0 = Vector::Zero(2);
        REQUIRE(decode(m, z0).isZero());
    }
    SECTION("identity linear layer passes input through") {
        AutoencoderConfig cfg;
        cfg.latent_dim = 3;
        cfg.hidden = 0;  // single linear layer
        AutoencoderModel m = make_autoencoder(3, cfg);
        m.encoder.w[0] = Matrix::Identity(3, 3);
        m.encoder.b[0].setZero();
        Vector x(3);
        x << 0.3, -0.7, 1.1;
        REQUIRE((encode(m, x) - x).lpNorm<Eigen::Infinity>() == 0.0);
    }
    SECTION("random params match a replayed forward pass") {
        AutoencoderConfig cfg;
        cfg.latent_dim = 2;
        cfg.hidden = 6;
        cfg.seed = 99;
        auto m = make_autoencoder(5, cfg);
        Pcg32 rng(4);
        Vector x(5);
        for (int i = 0; i < 5; ++i) x[i] = rng.normal();

        // step-by-step recomputation
        Vector h = (m.encoder.w[0].transpose() * x + m.encoder.b[0].row(0).transpose());
        h = h.array().tanh().matrix();
        Vector z = m.encoder.w[1].transpose() * h + m.encoder.b[1].row(0).transpose();
        REQUIRE((encode(m, x) - z).lpNorm<Eigen::Infinity>() < 1e-14);

        Vector hd = (m.decoder.w[0].transpose() * z + m.decoder.b[0].row(0).transpose());
        hd = hd.array().tanh().matrix();
        Vector xhat = m.decoder.w[1].transpose() * hd + m.decoder.b[1].row(0).transpose();
        REQUIRE((decode(m, z) - xhat).lpNorm<Eigen::Infinity>() < 1e-14);
    }
    SECTION("shape errors") {
        AutoencoderConfig cfg;
        auto m = make_autoencoder(7, cfg);
        const Vector wrong = Vector::Zero(5);
        REQUIRE_THROWS_AS(encode(m, wrong), ShapeError);
        REQUIRE_THROWS_AS(decode(m, wrong), ShapeError);
    }
}

TEST_CASE("reconstruction_loss") {
    Vector a(2), b(2);
    a << 1, 0;
    b << 0, 0;
    REQUIRE(reconstruction_loss(a, a) == 0.0);
    REQUIRE(reconstruction_loss(a, b) == 1.0);
    Vector c(2), d(2);
    c << 1, 2;
    d << 2, 4;
    REQUIRE(reconstruction_loss(c, d) == 5.0);
    REQUIRE_THROWS_AS(reconstruction_loss(a, Vector::Zero(3)), ShapeError);
}

TEST_CASE("autoencoder training") {
    SECTION("rank-3 factor data, linear nets, loss under 1e-4") {
        ReturnPanel data = rank_k_returns(240, 7, 3, 31);
        AutoencoderConfig cfg;
        cfg.latent_dim = 3;
        cfg.hidden = 16;
        cfg.activation = Activation::Linear;
        cfg.epochs = 800;
        cfg.lr = 2e-2;
        cfg.seed = 7;
        auto run = train_autoencoder(data, cfg);
        REQUIRE(run.loss_history.back() < 1e-4);
    }
    SECTION("fixture returns: final epoch loss under half the initial") {
        ReturnPanel data = compute_returns(random_walk_panel(300, 5, 12));
        AutoencoderConfig cfg;
        cfg.latent_dim = 3;
        cfg.hidden = 8;
        cfg.epochs = 120;
        cfg.lr = 5e-3;
        cfg.seed = 21;
        auto run = train_autoencoder(data, cfg);
        REQUIRE(run.loss_history.back() < 0.5 * run.loss_history.front());
    }
    SECTION("k = d with linear nets reaches ~zero loss") {
        ReturnPanel data = compute_returns(random_walk_panel(200, 3, 8));
        AutoencoderConfig cfg;
        cfg.latent_dim = 3;
        cfg.hidden = 0;  // direct linear d -> d -> d
        cfg.activation = Activation::Linear;
        cfg.epochs = 1500;
        cfg.lr = 3e-2;
        cfg.seed = 5;
        auto run = train_autoencoder(data, cfg);
        REQUIRE(run.loss_history.back() < 1e-3);
    }
    SECTION("training is bit-reproducible for a fixed seed") {
        ReturnPanel data = compute_returns(random_walk_panel(150, 4, 3));
        AutoencoderConfig cfg;
        cfg.latent_dim = 2;
        cfg.hidden = 6;
        cfg.epochs = 30;
        cfg.seed = 77;
        auto a = train_autoencoder(data, cfg);
        auto b = train_autoencoder(data, cfg);
        REQUIRE(a.model.params().flatten() == b.model.params().flatten());
    }
    SECTION("gradient of the batch loss passes central differences") {
        ReturnPanel data = compute_returns(random_walk_panel(40, 3, 9));
        AutoencoderConfig cfg;
        cfg.latent_dim = 2;
        cfg.hidden = 4;
        cfg.seed = 15;
        auto model = make_autoencoder(3, cfg);
        model.scaler = fit_return_scaler(data);
        const Matrix x = apply_standardizer(data.returns, model.scaler);
        ParamPack pack = model.params();
        auto f = [&](ad::Tape& t, ad::Var p) {
            auto vars = pack.tape_views(t, p);
            ad::Var input = t.constant(x);
            ad::Var z = model.encoder.forward(t, input, vars, 0);
            ad::Var xhat = model.decoder.forward(t, z, vars, 2 * model.encoder.layers());
            return ad::scale(ad::sum_all(ad::square(ad::sub(input, xhat))), 1.0 / x.rows());
        };
        REQUIRE(grad_check(f, pack.flatten(), 1e-6) < 1e-4);
    }
}

TEST_CASE("ae_covariance") {
    ReturnPanel data = compute_returns(random_walk_panel(220, 4, 19));

    SECTION("perfect reconstruction gives the empirical covariance") {
        AutoencoderConfig cfg;
        cfg.latent_dim = 4;
        cfg.hidden = 0;
        cfg.activation = Activation::Linear;
        AutoencoderModel m = make_autoencoder(4, cfg);
        m.scaler = fit_return_scaler(data);
        m.encoder.w[0] = Matrix::Identity(4, 4);
        m.decoder.w[0] = Matrix::Identity(4, 4);
        auto est = ae_covariance(m, data);
        auto emp = empirical_covariance(data);
        REQUIRE((est.sigma - emp.sigma).lpNorm<Eigen::Infinity>() < 1e-12);
        REQUIRE(est.source == "autoencoder");
    }
    SECTION("constant decoder output leaves only diagonal variances") {
        AutoencoderConfig cfg;
        cfg.latent_dim = 2;
        cfg.hidden = 0;
        cfg.activation = Activation::Linear;
        AutoencoderModel m = make_autoencoder(4, cfg);
        m.scaler = fit_return_scaler(data);
        ParamPack pack = m.params();
        pack.assign(Vector::Zero(pack.size()));  // xhat_std = 0 -> xhat = column means
        auto est = ae_covariance(m, data);
        auto emp = empirical_covariance(data);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                if (i == j)
                    REQUIRE(est.sigma(i, i) == Catch::Approx(emp.sigma(i, i)).epsilon(1e-9));
                else
                    REQUIRE(est.sigma(i, j) == Catch::Approx(0.0).margin(1e-18));
            }
    }
    SECTION("trained estimate is symmetric, PSD, with sane diagonal") {
        AutoencoderConfig cfg;
        cfg.latent_dim = 2;
        cfg.hidden = 8;
        cfg.epochs = 200;
        cfg.lr = 5e-3;
        cfg.seed = 3;
        auto run = train_autoencoder(data, cfg);
        auto est = ae_covariance(run.model, data);
        REQUIRE((est.sigma - est.sigma.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12);
        REQUIRE(min_eigenvalue(est.sigma) >= -1e-10);
        auto emp = empirical_covariance(data);
        for (int i = 0; i < 4; ++i)
            REQUIRE(est.sigma(i, i) ==
                    Catch::Approx(emp.sigma(i, i)).epsilon(0.10));  // within 10%
    }
    SECTION("too little data rejected") {
        AutoencoderConfig cfg;
        auto m = make_autoencoder(4, cfg);
        m.scaler = fit_return_scaler(data);
        ReturnPanel one;
        one.tickers = data.tickers;
        one.dates = {data.dates[0]};
        one.returns = data.returns.topRows(1);
        REQUIRE_THROWS_AS(ae_covariance(m, one), DataError);
    }
}

TEST_CASE("autoencoder container round trip") {
    ReturnPanel data = compute_returns(random_walk_panel(150, 3, 4));
    AutoencoderConfig cfg;
    cfg.latent_dim = 2;
    cfg.hidden = 5;
    cfg.epochs = 20;
    cfg.seed = 9;
    auto run = train_autoencoder(data, cfg);

    const auto path = (fs::temp_directory_path() / "portlab_ae_test.json").string();
    save_params(path, to_container(run.model));
    auto loaded = autoencoder_from_container(load_params(path));

    Vector x(3);
    x << 0.5, -0.2, 0.9;
    REQUIRE((encode(run.model, x) - encode(loaded, x)).lpNorm<Eigen::Infinity>() == 0.0);

    // identical bytes on rewrite
    const std::string bytes = file_bytes(path);
    save_params(path, to_container(loaded));
    REQUIRE(file_bytes(path) == bytes);
    fs::remove(path);
}

// ---------------------------------------------------------------------------
// gnn
// ---------------------------------------------------------------------------

TEST_CASE("build_graph") {
    ReturnPanel data = compute_returns(random_walk_panel(200, 4, 2));

    SECTION("threshold 0 yields the complete graph") {
        AssetGraph g = build_graph(data, 120, 0.0);
        for (int i = 0; i < 4; ++i) {
            REQUIRE_FALSE(g.has_edge(i, i));
            for (int j = 0; j < 4; ++j)
                if (i != j) REQUIRE(g.has_edge(i, j));
        }
    }
    SECTION("threshold above max correlation isolates every node") {
        AssetGraph g = build_graph(data, 120, 0.999999);
        REQUIRE(g.weights.isZero());
        for (int i = 0; i < 4; ++i) REQUIRE(g.isolated(i));
    }
    SECTION("two perfectly correlated assets leave exactly one edge") {
        Pcg32 rng(8);
        Matrix r(100, 3);
        for (int t = 0; t < 100; ++t) {
            const double x = 0.01 * rng.normal();
            r(t, 0) = x;
            r(t, 1) = x;               // duplicate asset
            r(t, 2) = 0.01 * rng.normal();  // independent
        }
        AssetGraph g = build_graph(return_panel(r), 100, 0.9);
        int edges = 0;
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) edges += g.has_edge(i, j);
        REQUIRE(edges == 1);
        REQUIRE(g.has_edge(0, 1));
    }
    SECTION("zero-variance asset is isolated with a warning") {
        Matrix r(60, 2);
        Pcg32 rng(6);
        for (int t = 0; t < 60; ++t) {
            r(t, 0) = 0.01 * rng.normal();
            r(t, 1) = 0.0;
        }
        AssetGraph g = build_graph(return_panel(r), 60, 0.0);
        REQUIRE(g.isolated(1));
        REQUIRE_FALSE(g.warnings.empty());
    }
}

TEST_CASE("message_pass") {
    SECTION("empty edge set leaves only the self term") {
        Matrix r(50, 2);
        Pcg32 rng(14);
        for (int t = 0; t < 50; ++t)
            for (int i = 0; i < 2; ++i) r(t, i) = 0.01 * rng.normal();
        AssetGraph g = build_graph(return_panel(r), 50, 0.9999);
        Matrix h = Matrix::Random(2, 3);
        Matrix w_self = Matrix::Random(3, 4), w_nbr = Matrix::Random(3, 4);
        Matrix bias = Matrix::Random(1, 4);
        Matrix out = message_pass(g, h, w_self, w_nbr, bias);
        Matrix expect = (((h * w_self).rowwise() + bias.row(0)).array().tanh()).matrix();
        REQUIRE((out - expect).lpNorm<Eigen::Infinity>() == 0.0);
    }
    SECTION("identical features on a symmetric graph stay identical") {
        ReturnPanel data = compute_returns(random_walk_panel(150, 4, 5));
        AssetGraph g = build_graph(data, 100, 0.0);
        g.weights.setOnes();
        g.weights.diagonal().setZero();
        for (int i = 0; i < 4; ++i) g.neighbor_mean.row(i) = g.weights.row(i) / 3.0;
        Matrix h = Matrix::Ones(4, 3) * 0.3;
        Matrix out = message_pass(g, h, Matrix::Random(3, 5), Matrix::Random(3, 5),
                                  Matrix::Random(1, 5));
        for (int i = 1; i < 4; ++i)
            REQUIRE((out.row(i) - out.row(0)).lpNorm<Eigen::Infinity>() == 0.0);
    }
    SECTION("two-node path matches a hand-computed update") {
        AssetGraph g;
        g.tickers = {"a", "b"};
        g.weights.resize(2, 2);
        g.weights << 0, 0.5, 0.5, 0;
        g.neighbor_mean.resize(2, 2);
        g.neighbor_mean << 0, 1, 1, 0;
        g.features.resize(2, 1);
        g.features << 1.0, 2.0;

        Matrix w_self = Matrix::Constant(1, 1, 0.25);
        Matrix w_nbr = Matrix::Constant(1, 1, -0.5);
        Matrix bias = Matrix::Constant(1, 1, 0.1);
        Matrix out = message_pass(g, g.features, w_self, w_nbr, bias);
        REQUIRE(out(0, 0) == Catch::Approx(std::tanh(1.0 * 0.25 + 2.0 * -0.5 + 0.1)).margin(1e-15));
        REQUIRE(out(1, 0) == Catch::Approx(std::tanh(2.0 * 0.25 + 1.0 * -0.5 + 0.1)).margin(1e-15));
    }
    SECTION("shape mismatch rejected") {
        ReturnPanel data = compute_returns(random_walk_panel(80, 2, 7));
        AssetGraph g = build_graph(data, 60, 0.0);
        REQUIRE_THROWS_AS(
            message_pass(g, Matrix::Zero(2, 3), Matrix::Zero(4, 5), Matrix::Zero(4, 5),
                         Matrix::Zero(1, 5)),
            ShapeError);
    }
}

TEST_CASE("gnn_embed") {
    ReturnPanel data = compute_returns(random_walk_panel(200, 4, 23));
    AssetGraph g = build_graph(data, 126, 0.2);
    GnnConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 6;
    cfg.embed_dim = 3;

    SECTION("zero params embed to zero") {
        Pcg32 rng(1);
        GnnParams p = make_gnn_params(cfg, rng);
        ParamPack pack = p.pack();
        pack.assign(Vector::Zero(pack.size()));
        REQUIRE(gnn_embed(g, p).isZero());
    }
    SECTION("single layer equals message_pass plus the linear head") {
        GnnConfig one = cfg;
        one.layers = 1;
        Pcg32 rng(2);
        GnnParams p = make_gnn_params(one, rng);
        Matrix h = message_pass(g, g.features, p.w_self[0], p.w_nbr[0], p.bias[0]);
        Matrix expect = ((h * p.w_out).rowwise() + p.b_out.row(0)).eval();
        REQUIRE((gnn_embed(g, p) - expect).lpNorm<Eigen::Infinity>() == 0.0);
    }
    SECTION("plain and taped forwards agree") {
        Pcg32 rng(3);
        GnnParams p = make_gnn_params(cfg, rng);
        ParamPack pack = p.pack();
        ad::Tape tape;
        ad::Var flat = tape.param(pack.flatten().transpose());
        auto vars = pack.tape_views(tape, flat);
        ad::Var z = portlab::detail::gnn_embed_taped(tape, g, cfg.layers, vars);
        REQUIRE((gnn_embed(g, p) - tape.value(z)).lpNorm<Eigen::Infinity>() < 1e-14);
    }
    SECTION("permutation equivariance") {
        Pcg32 rng(4);
        GnnParams p = make_gnn_params(cfg, rng);
        const std::vector<int> perm = {2, 0, 3, 1};
        auto permute = [&](const AssetGraph& src) {
            AssetGraph out = src;
            for (int i = 0; i < 4; ++i) {
                out.features.row(i) = src.features.row(perm[static_cast<size_t>(i)]);
                for (int j = 0; j < 4; ++j) {
                    out.weights(i, j) =
                        src.weights(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
                    out.neighbor_mean(i, j) = src.neighbor_mean(perm[static_cast<size_t>(i)],
                                                                perm[static_cast<size_t>(j)]);
                }
            }
            return out;
        };

        // Exact case: a 4-cycle. Every aggregation row sums two nonzero
        // products, and two-term IEEE sums are order-independent, so
        // relabeling permutes the outputs bit-identically.
        AssetGraph cycle = g;
        cycle.weights.setZero();
        for (int i = 0; i < 4; ++i) {
            cycle.weights(i, (i + 1) % 4) = 1.0;
            cycle.weights((i + 1) % 4, i) = 1.0;
        }
        cycle.neighbor_mean = 0.5 * cycle.weights;
        Matrix zc = gnn_embed(cycle, p);
        Matrix zcp = gnn_embed(permute(cycle), p);
        for (int i = 0; i < 4; ++i)
            REQUIRE((zcp.row(i) - zc.row(perm[static_cast<size_t>(i)]))
                        .lpNorm<Eigen::Infinity>() == 0.0);

        // General graphs reassociate the neighbor sums, which costs at most
        // a few ulps.
        Matrix z = gnn_embed(g, p);
        Matrix zp = gnn_embed(permute(g), p);
        for (int i = 0; i < 4; ++i)
            REQUIRE((zp.row(i) - z.row(perm[static_cast<size_t>(i)])).lpNorm<Eigen::Infinity>() <=
                    1e-14);
    }
}

TEST_CASE("gnn_covariance") {
    ReturnPanel data = compute_returns(random_walk_panel(200, 3, 29));

    SECTION("identical embeddings give the rank-1 vol outer product") {
        Matrix z = Matrix::Ones(3, 4);
        auto est = gnn_covariance(z, data, 126);
        Vector vol(3);
        const Matrix x = data.returns.bottomRows(126);
        for (int i = 0; i < 3; ++i) {
            const double m = x.col(i).mean();
            vol[i] = std::sqrt((x.col(i).array() - m).square().sum() / 125);
        }
        const Matrix expect = vol * vol.transpose();
        REQUIRE((est.sigma - expect).lpNorm<Eigen::Infinity>() < 1e-15);
        REQUIRE(est.source == "gnn");
    }
    SECTION("orthogonal embeddings give a diagonal matrix of variances") {
        Matrix z = Matrix::Identity(3, 3);
        auto est = gnn_covariance(z, data, 126);
        auto emp = empirical_covariance(data, 126);
        for (int i = 0; i < 3; ++i) {
            REQUIRE(est.sigma(i, i) == Catch::Approx(emp.sigma(i, i)).epsilon(1e-12));
            for (int j = 0; j < 3; ++j)
                if (i != j) REQUIRE(est.sigma(i, j) == 0.0);
        }
    }
    SECTION("zero-norm embedding row becomes diagonal-only") {
        Matrix z(3, 2);
        z << 1, 0, 0, 0, 1, 1;
        z.row(1).setZero();
        auto est = gnn_covariance(z, data, 126);
        REQUIRE(est.sigma(0, 1) == 0.0);
        REQUIRE(est.sigma(1, 2) == 0.0);
        REQUIRE(est.sigma(1, 1) > 0.0);
    }
    SECTION("diagonal equals trailing sample variances within 1e-9") {
        Pcg32 rng(41);
        Matrix z(3, 5);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 5; ++j) z(i, j) = rng.normal();
        auto est = gnn_covariance(z, data, 126);
        auto emp = empirical_covariance(data, 126);
        for (int i = 0; i < 3; ++i)
            REQUIRE(std::abs(est.sigma(i, i) - emp.sigma(i, i)) < 1e-9);
        REQUIRE((est.sigma - est.sigma.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
}

TEST_CASE("gnn training") {
    SECTION("recovers the two-block structure") {
        ReturnPanel data = two_block_returns(600, 2, 50);
        GnnConfig cfg;
        cfg.window = 80;
        cfg.threshold = 0.25;
        cfg.layers = 2;
        cfg.hidden = 8;
        cfg.embed_dim = 4;
        cfg.epochs = 80;
        cfg.lr = 3e-2;
        cfg.seed = 11;
        auto run = train_gnn(data, cfg);
        REQUIRE(run.loss_history.back() < run.loss_history.front());

        AssetGraph g = build_graph(data, cfg.window, cfg.threshold);
        auto est = gnn_covariance(gnn_embed(g, run.model.params), data, cfg.window);
        // every within-block covariance above every cross-block one
        const double within_min = std::min(est.sigma(0, 1), est.sigma(2, 3));
        const double cross_max = std::max(std::max(est.sigma(0, 2), est.sigma(0, 3)),
                                          std::max(est.sigma(1, 2), est.sigma(1, 3)));
        REQUIRE(within_min > cross_max);
    }
    SECTION("zero epochs returns the initialized params unchanged") {
        ReturnPanel data = two_block_returns(600, 2, 51);
        GnnConfig cfg;
        cfg.window = 80;
        cfg.epochs = 0;
        cfg.seed = 13;
        auto run = train_gnn(data, cfg);
        Pcg32 rng(cfg.seed);
        GnnParams expect = make_gnn_params(cfg, rng);
        REQUIRE(run.model.params.pack().flatten() == expect.pack().flatten());
    }
    SECTION("too little history rejected") {
        ReturnPanel data = two_block_returns(150, 2, 52);
        GnnConfig cfg;
        cfg.window = 80;
        REQUIRE_THROWS_AS(train_gnn(data, cfg), TrainingError);
    }
    SECTION("Frobenius training loss passes the gradient check") {
        ReturnPanel data = two_block_returns(300, 2, 53);
        GnnConfig cfg;
        cfg.window = 60;
        cfg.threshold = 0.2;
        cfg.layers = 2;
        cfg.hidden = 4;
        cfg.embed_dim = 3;
        cfg.seed = 17;
        Pcg32 rng(cfg.seed);
        GnnParams params = make_gnn_params(cfg, rng);
        ParamPack pack = params.pack();
        auto f = [&](ad::Tape& t, ad::Var p) {
            auto vars = pack.tape_views(t, p);
            // scale up: losses are ~1e-8 in raw units, too small for the
            // relative-error denominator floor of max(1, |g|)
            return ad::scale(gnn_training_loss(t, data, cfg, cfg.layers, vars), 1e6);
        };
        REQUIRE(grad_check(f, pack.flatten(), 1e-6) < 1e-4);
    }
    SECTION("container round trip preserves the model") {
        ReturnPanel data = two_block_returns(600, 2, 54);
        GnnConfig cfg;
        cfg.window = 80;
        cfg.epochs = 5;
        cfg.seed = 23;
        auto run = train_gnn(data, cfg);
        const auto path = (fs::temp_directory_path() / "portlab_gnn_test.json").string();
        save_params(path, to_container(run.model));
        auto loaded = gnn_from_container(load_params(path));
        REQUIRE(loaded.params.pack().flatten() == run.model.params.pack().flatten());
        fs::remove(path);
    }
}

// ---------------------------------------------------------------------------
// transformer
// ---------------------------------------------------------------------------

TEST_CASE("positional encoding") {
    Matrix pe = positional_encoding(8, 6);
    SECTION("position 0 alternates 0/1") {
        for (int j = 0; j < 3; ++j) {
            REQUIRE(pe(0, 2 * j) == 0.0);
            REQUIRE(pe(0, 2 * j + 1) == 1.0);
        }
    }
    SECTION("entries bounded by [-1, 1]") {
        REQUIRE(pe.maxCoeff() <= 1.0);
        REQUIRE(pe.minCoeff() >= -1.0);
    }
    SECTION("position 1 first pair is [sin 1, cos 1]") {
        REQUIRE(pe(1, 0) == Catch::Approx(std::sin(1.0)).margin(1e-12));
        REQUIRE(pe(1, 1) == Catch::Approx(std::cos(1.0)).margin(1e-12));
    }
    SECTION("odd d_model rejected") {
        REQUIRE_THROWS_AS(positional_encoding(4, 5), ArgumentError);
    }
}

TEST_CASE("attention contracts") {
    Pcg32 rng(61);
    auto rand = [&](int r, int c) {
        Matrix m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
        return m;
    };

    SECTION("T=1 returns V exactly") {
        Matrix q = rand(1, 3), k = rand(1, 3), v = rand(1, 2);
        REQUIRE(attention(q, k, v) == v);
    }
    SECTION("orthogonal Q/K average the V rows") {
        Matrix q = Matrix::Zero(2, 3);  // all scores zero -> uniform weights
        Matrix k = rand(4, 3), v = rand(4, 2);
        Matrix out = attention(q, k, v);
        const Eigen::RowVectorXd mean = v.colwise().mean();
        for (int r = 0; r < 2; ++r)
            REQUIRE((out.row(r) - mean).lpNorm<Eigen::Infinity>() < 1e-15);
    }
    SECTION("random 3x2 case matches the direct formula") {
        Matrix q = rand(3, 2), k = rand(3, 2), v = rand(3, 4);
        Matrix scores = q * k.transpose() / std::sqrt(2.0);
        Matrix weights(3, 3);
        for (int r = 0; r < 3; ++r) {
            double denom = 0;
            for (int c = 0; c < 3; ++c) denom += std::exp(scores(r, c));
            for (int c = 0; c < 3; ++c) weights(r, c) = std::exp(scores(r, c)) / denom;
        }
        REQUIRE((attention(q, k, v) - weights * v).lpNorm<Eigen::Infinity>() < 1e-12);
    }
    SECTION("rows of the weight matrix sum to one; output is a convex mix") {
        for (int trial = 0; trial < 20; ++trial) {
            Matrix q = rand(5, 3), k = rand(5, 3), v = rand(5, 2);
            Matrix w = attention_weights(q, k);
            for (int r = 0; r < 5; ++r) REQUIRE(std::abs(w.row(r).sum() - 1.0) <= 1e-12);
            Matrix out = attention(q, k, v);
            for (int c = 0; c < 2; ++c) {
                REQUIRE(out.col(c).maxCoeff() <= v.col(c).maxCoeff() + 1e-12);
                REQUIRE(out.col(c).minCoeff() >= v.col(c).minCoeff() - 1e-12);
            }
        }
    }
    SECTION("permutation equivariance without positional encoding") {
        // T = 2: the softmax denominator and the A*V row sums have two terms,
        // and two-term IEEE sums are order-independent, so a swap is exact.
        Matrix q2 = rand(2, 3), k2 = rand(2, 3), v2 = rand(2, 2);
        Matrix swap = Matrix::Zero(2, 2);
        swap(0, 1) = swap(1, 0) = 1.0;
        REQUIRE((attention(swap * q2, swap * k2, swap * v2) - swap * attention(q2, k2, v2))
                    .lpNorm<Eigen::Infinity>() == 0.0);

        // Larger T reassociates the row sums; a few ulps at most.
        Matrix q = rand(4, 3), k = rand(4, 3), v = rand(4, 2);
        Matrix perm = Matrix::Zero(4, 4);
        perm(0, 2) = perm(1, 0) = perm(2, 3) = perm(3, 1) = 1.0;
        Matrix lhs = attention(perm * q, perm * k, perm * v);
        Matrix rhs = perm * attention(q, k, v);
        REQUIRE((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-14);
    }
    SECTION("sqrt(d_k) law under duplicated K/Q columns") {
        // Duplicating the columns of Q and K doubles every dot product while
        // sqrt(d_k) only grows by sqrt 2, so pre-softmax scores scale by
        // exactly sqrt 2 on the doubled width.
        Matrix q = rand(3, 2), k = rand(3, 2);
        Matrix q2(3, 4), k2(3, 4);
        q2 << q, q;
        k2 << k, k;
        Matrix s1 = q * k.transpose() / std::sqrt(2.0);
        Matrix s2 = q2 * k2.transpose() / std::sqrt(4.0);
        REQUIRE((s2 - std::sqrt(2.0) * s1).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("multi-head attention and encoder layer") {
    TransformerConfig cfg;
    cfg.window = 5;
    cfg.d_model = 6;
    cfg.heads = 1;
    cfg.layers = 1;
    cfg.d_ff = 8;
    cfg.seed = 19;
    TransformerModel m = make_transformer(3, cfg);
    Pcg32 rng(71);
    Matrix x(5, 6);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 6; ++c) x(r, c) = rng.normal();

    SECTION("single head with identity W_O reduces to plain attention") {
        TransformerLayer lay = m.layers[0];
        lay.w_o = Matrix::Identity(6, 6);
        lay.b_o.setZero();
        Matrix expect = attention(x * lay.w_q[0], x * lay.w_k[0], x * lay.w_v[0]);
        REQUIRE((multi_head_attention(x, lay) - expect).lpNorm<Eigen::Infinity>() < 1e-14);
    }
    SECTION("zero projections leave the normalized residual path") {
        TransformerLayer lay = m.layers[0];
        for (auto& w : lay.w_v) w.setZero();
        lay.w_o.setZero();
        lay.b_o.setZero();
        lay.ff_w1.setZero();
        lay.ff_w2.setZero();
        lay.ff_b1.setZero();
        lay.ff_b2.setZero();
        REQUIRE(multi_head_attention(x, lay).isZero());
        Matrix out = encoder_layer(x, lay, cfg.ln_eps);
        Matrix expect = portlab::detail::layer_norm_plain(
            portlab::detail::layer_norm_plain(x, lay.ln1_gain, lay.ln1_bias, cfg.ln_eps),
            lay.ln2_gain, lay.ln2_bias, cfg.ln_eps);
        REQUIRE((out - expect).lpNorm<Eigen::Infinity>() < 1e-14);
    }
    SECTION("taped forward replays the plain forward") {
        TransformerConfig cfg2;
        cfg2.window = 5;
        cfg2.d_model = 8;
        cfg2.heads = 2;
        cfg2.layers = 2;
        cfg2.d_ff = 6;
        cfg2.seed = 23;
        TransformerModel m2 = make_transformer(3, cfg2);
        Pcg32 r2(5);
        Matrix win(5, 3);
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 3; ++c) win(r, c) = r2.normal();

        const Matrix plain = transformer_encode(m2, win);
        ParamPack pack = m2.params();
        ad::Tape tape;
        ad::Var flat = tape.param(pack.flatten().transpose());
        auto vm = portlab::detail::map_transformer_vars(cfg2, pack.tape_views(tape, flat));
        ad::Var pred = portlab::detail::transformer_predict_taped(tape, m2, vm, win);
        const Eigen::RowVectorXd head_plain =
            (plain.row(4) * m2.w_head) + m2.b_head.row(0);
        REQUIRE((tape.value(pred).row(0) - head_plain).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("forecast_returns") {
    SECTION("zero head forecasts zero") {
        TransformerConfig cfg;
        cfg.window = 6;
        cfg.d_model = 8;
        cfg.heads = 2;
        cfg.layers = 1;
        cfg.seed = 3;
        TransformerModel m = make_transformer(2, cfg);
        ReturnPanel data = compute_returns(random_walk_panel(50, 2, 6));
        m.scaler = fit_return_scaler(data);
        auto mu = forecast_returns(m, data.tickers, data.returns.topRows(6));
        REQUIRE(mu.mu.isZero());
    }
    SECTION("short window rejected") {
        TransformerConfig cfg;
        cfg.window = 6;
        cfg.d_model = 8;
        cfg.heads = 2;
        TransformerModel m = make_transformer(2, cfg);
        ReturnPanel data = compute_returns(random_walk_panel(50, 2, 6));
        m.scaler = fit_return_scaler(data);
        REQUIRE_THROWS_AS(forecast_returns(m, data.tickers, data.returns.topRows(5)),
                          ArgumentError);
    }
    SECTION("row permutation changes the output (positional encoding active)") {
        TransformerConfig cfg;
        cfg.window = 6;
        cfg.d_model = 8;
        cfg.heads = 2;
        cfg.layers = 1;
        cfg.seed = 31;
        TransformerModel m = make_transformer(2, cfg);
        Pcg32 rng(9);
        for (Eigen::Index r = 0; r < m.w_head.rows(); ++r)
            for (Eigen::Index c = 0; c < m.w_head.cols(); ++c) m.w_head(r, c) = rng.normal();
        ReturnPanel data = compute_returns(random_walk_panel(50, 2, 6));
        m.scaler = fit_return_scaler(data);
        Matrix win = data.returns.topRows(6);
        Matrix swapped = win;
        swapped.row(0).swap(swapped.row(3));
        auto a = forecast_returns(m, data.tickers, win);
        auto b = forecast_returns(m, data.tickers, swapped);
        REQUIRE((a.mu - b.mu).lpNorm<Eigen::Infinity>() > 1e-12);
    }
}

TEST_CASE("transformer training") {
    SECTION("forced AR(1) dynamics are learned out of sample") {
        ReturnPanel data = ar1_forced_returns(360, 3);
        auto [train, test] = portlab::split(data, data.dates[300]);
        TransformerConfig cfg;
        cfg.window = 16;
        cfg.d_model = 16;
        cfg.heads = 2;
        cfg.layers = 1;
        cfg.d_ff = 32;
        cfg.epochs = 200;  // early stop usually ends near 120
        cfg.lr = 3e-3;
        cfg.seed = 37;
        auto run = train_transformer(train, cfg);

        // out-of-sample one-step MSE vs variance of the targets
        double mse = 0.0, var = 0.0;
        int count = 0;
        std::vector<double> targets;
        for (int s = 0; s + cfg.window < test.days(); ++s) {
            auto mu = forecast_returns(run.model, test.tickers,
                                       test.returns.middleRows(s, cfg.window));
            const Eigen::RowVectorXd target = test.returns.row(s + cfg.window);
            mse += (mu.mu.transpose() - target).squaredNorm();
            for (int i = 0; i < 3; ++i) targets.push_back(target[i]);
            ++count;
        }
        mse /= count * 3.0;
        double mean = 0;
        for (const double t : targets) mean += t;
        mean /= static_cast<double>(targets.size());
        for (const double t : targets) var += (t - mean) * (t - mean);
        var /= static_cast<double>(targets.size());
        REQUIRE(mse < 0.10 * var);
    }
    SECTION("training reduces MSE on a noisy fixture") {
        ReturnPanel data = compute_returns(random_walk_panel(260, 3, 44));
        TransformerConfig cfg;
        cfg.window = 12;
        cfg.d_model = 8;
        cfg.heads = 2;
        cfg.layers = 1;
        cfg.d_ff = 16;
        cfg.epochs = 6;
        cfg.lr = 1e-3;
        cfg.seed = 41;
        auto run = train_transformer(data, cfg);
        REQUIRE(run.train_mse.back() < run.train_mse.front());
    }
    SECTION("same seed reproduces identical params") {
        ReturnPanel data = compute_returns(random_walk_panel(200, 2, 45));
        TransformerConfig cfg;
        cfg.window = 10;
        cfg.d_model = 8;
        cfg.heads = 2;
        cfg.layers = 1;
        cfg.d_ff = 8;
        cfg.epochs = 3;
        cfg.seed = 47;
        auto a = train_transformer(data, cfg);
        auto b = train_transformer(data, cfg);
        REQUIRE(a.model.params().flatten() == b.model.params().flatten());
    }
    SECTION("container round trip preserves forecasts") {
        ReturnPanel data = compute_returns(random_walk_panel(200, 2, 46));
        TransformerConfig cfg;
        cfg.window = 10;
        cfg.d_model = 8;
        cfg.heads = 2;
        cfg.layers = 1;
        cfg.d_ff = 8;
        cfg.epochs = 2;
        cfg.seed = 53;
        auto run = train_transformer(data, cfg);
        const auto path = (fs::temp_directory_path() / "portlab_tf_test.json").string();
        save_params(path, to_container(run.model));
        auto loaded = transformer_from_container(load_params(path));
        Matrix win = data.returns.topRows(10);
        auto a = forecast_returns(run.model, data.tickers, win);
        auto b = forecast_returns(loaded, data.tickers, win);
        REQUIRE((a.mu - b.mu).lpNorm<Eigen::Infinity>() == 0.0);
        fs::remove(path);
    }
}
