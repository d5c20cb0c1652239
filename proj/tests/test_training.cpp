#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pcn/analysis.hpp"
#include "pcn/training.hpp"

using namespace pcn;

namespace {

const Activation kAllActs[] = {Activation::identity, Activation::tanh_fn,
                               Activation::relu, Activation::leaky_relu,
                               Activation::gelu, Activation::sigmoid};

struct Fixture {
    Network<double> net;
    Matrix<double> x, y;
};

Fixture fixture(Rng& rng, Activation act, Loss loss, std::size_t batch,
                std::vector<std::size_t> dims = {3, 4, 4, 2}) {
    for (int attempt = 0; attempt < 50; ++attempt) {
        Fixture f;
        f.net = oracles::random_net(dims, act, loss, rng);
        f.x = oracles::random_matrix(batch, dims.front(), rng);
        f.y = (loss == Loss::mse)
                  ? oracles::random_matrix(batch, dims.back(), rng)
                  : oracles::one_hot_rows(batch, dims.back(), rng);
        if (act != Activation::relu && act != Activation::leaky_relu) return f;
        if (oracles::min_abs_preactivation(f.net, f.x) > 1e-3) return f;
    }
    throw std::runtime_error("no kink-free fixture found");
}

double grads_rel_err(const WeightGrads<double>& got,
                     const WeightGrads<double>& want) {
    double worst = 0.0;
    for (std::size_t i = 0; i < got.num_layers(); ++i) {
        double scale = max_abs(want.weight[i]);
        for (double b : want.bias[i]) scale = std::max(scale, std::fabs(b));
        double diff = max_abs(got.weight[i] - want.weight[i]);
        for (std::size_t k = 0; k < got.bias[i].size(); ++k)
            diff = std::max(diff, std::fabs(got.bias[i][k] - want.bias[i][k]));
        worst = std::max(worst, diff / (scale + 1e-300));
    }
    return worst;
}

Dataset balanced_dataset(std::size_t per_class, std::size_t classes,
                         std::size_t dim, Rng& rng) {
    Dataset ds;
    const std::size_t n = per_class * classes;
    ds.images = Matrix<double>(n, dim);
    ds.one_hot = Matrix<double>(n, classes);
    ds.labels.resize(n);
    ds.num_classes = classes;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % classes;
        ds.labels[i] = static_cast<int>(c);
        ds.one_hot(i, c) = 1.0;
        for (std::size_t j = 0; j < dim; ++j) ds.images(i, j) = rng.gaussian();
    }
    return ds;
}

}  // namespace

// ---------------------------------------------------------------------------
// Weight gradients
// ---------------------------------------------------------------------------

TEST_CASE("backprop_grads: zero loss gives zero gradients") {
    Rng rng(1);
    Network<double> net =
        oracles::random_net({3, 4, 2}, Activation::tanh_fn, Loss::mse, rng);
    Matrix<double> x = oracles::random_matrix(2, 3, rng);
    Matrix<double> y = forward(net, x).y_hat;  // perfect fit
    WeightGrads<double> g = backprop_grads(net, x, y);
    for (std::size_t i = 0; i < g.num_layers(); ++i) {
        CHECK(max_abs(g.weight[i]) == 0.0);
        for (double b : g.bias[i]) CHECK(b == 0.0);
    }
}

TEST_CASE("backprop_grads match finite differences of the loss") {
    Rng rng(2);
    int idx = 0;
    for (Activation act : kAllActs) {
        const Loss loss = (idx++ % 2) ? Loss::cross_entropy : Loss::mse;
        Fixture f = fixture(rng, act, loss, 2);
        WeightGrads<double> g = backprop_grads(f.net, f.x, f.y);
        auto scalar = [&]() {
            return loss_and_grad(f.net.loss, forward(f.net, f.x).y_hat, f.y)
                .value;
        };
        std::vector<double> got, want;
        for (std::size_t li = 0; li < f.net.layers.size(); ++li) {
            for (std::size_t k = 0; k < f.net.layers[li].weight.size(); ++k) {
                got.push_back(g.weight[li].data[k]);
                want.push_back(oracles::fd_partial(
                    scalar, f.net.layers[li].weight.data[k]));
            }
            for (std::size_t k = 0; k < f.net.layers[li].bias.size(); ++k) {
                got.push_back(g.bias[li][k]);
                want.push_back(
                    oracles::fd_partial(scalar, f.net.layers[li].bias[k]));
            }
        }
        CHECK(oracles::max_rel_err(got, want) <= 1e-6);
    }
}

TEST_CASE("pc_weight_grads: zero errors drive only the output layer") {
    Rng rng(3);
    Fixture f = fixture(rng, Activation::gelu, Loss::mse, 2);
    ErrorConfig<double> e = zero_errors(f.net, 2);
    WeightGrads<double> g = pc_weight_grads(f.net, f.x, e, f.y);
    for (std::size_t i = 0; i + 1 < g.num_layers(); ++i) {
        CHECK(max_abs(g.weight[i]) == 0.0);
        for (double b : g.bias[i]) CHECK(b == 0.0);
    }
    WeightGrads<double> bp = backprop_grads(f.net, f.x, f.y);
    CHECK(max_abs(g.weight.back() - bp.weight.back()) <= 1e-14);
}

TEST_CASE("pc_weight_grads match finite differences at fixed states") {
    // These are the theta-derivatives of the state energy with the states
    // frozen, which is exactly what the local update formula claims.
    Rng rng(4);
    int idx = 0;
    for (Activation act :
         {Activation::tanh_fn, Activation::gelu, Activation::identity}) {
        const Loss loss = (idx++ % 2) ? Loss::cross_entropy : Loss::mse;
        Fixture f = fixture(rng, act, loss, 2);
        StateConfig<double> s;
        for (std::size_t i = 0; i < f.net.num_hidden(); ++i)
            s.layers.push_back(
                oracles::random_matrix(2, f.net.state_dim(i), rng));
        ErrorConfig<double> e = states_to_errors(f.net, f.x, s);
        WeightGrads<double> g = pc_weight_grads_at(f.net, f.x, s, e, f.y);

        auto scalar = [&]() { return energy_spc(f.net, f.x, f.y, s).total; };
        std::vector<double> got, want;
        for (std::size_t li = 0; li < f.net.layers.size(); ++li) {
            for (std::size_t k = 0; k < f.net.layers[li].weight.size(); ++k) {
                got.push_back(g.weight[li].data[k]);
                want.push_back(oracles::fd_partial(
                    scalar, f.net.layers[li].weight.data[k]));
            }
            for (std::size_t k = 0; k < f.net.layers[li].bias.size(); ++k) {
                got.push_back(g.bias[li][k]);
                want.push_back(
                    oracles::fd_partial(scalar, f.net.layers[li].bias[k]));
            }
        }
        CHECK(oracles::max_rel_err(got, want) <= 1e-6);
    }
}

TEST_CASE("T=1 reduction: one ePC step reproduces scaled backprop exactly") {
    Rng rng(5);
    int idx = 0;
    for (Activation act : kAllActs) {
        for (Loss loss : {Loss::mse, Loss::cross_entropy}) {
            Fixture f = fixture(rng, act, loss, 3);
            const double lambda = 0.02 + 0.1 * (idx++ % 5);
            RelaxConfig<double> cfg;
            cfg.lr = lambda;
            cfg.steps = 1;
            EpcRelaxResult<double> r = epc_relax(f.net, f.x, f.y, cfg);
            WeightGrads<double> pc = pc_weight_grads_at(
                f.net, f.x, r.states_at_last_grad, r.errors, f.y);
            WeightGrads<double> want = backprop_grads(f.net, f.x, f.y);
            const std::size_t nh = f.net.num_hidden();
            for (std::size_t i = 0; i < nh; ++i) {
                for (auto& v : want.weight[i].data) v *= lambda;
                for (auto& v : want.bias[i]) v *= lambda;
            }
            CHECK(grads_rel_err(pc, want) <= 1e-10);
        }
    }
}

TEST_CASE("small lambda*T: ePC grads approximate scaled backprop") {
    Rng rng(6);
    Fixture f = fixture(rng, Activation::tanh_fn, Loss::mse, 2);
    const double lambda = 2.5e-5;
    const std::size_t steps = 4;  // lambda*T = 1e-4
    RelaxConfig<double> cfg;
    cfg.lr = lambda;
    cfg.steps = steps;
    EpcRelaxResult<double> r = epc_relax(f.net, f.x, f.y, cfg);
    WeightGrads<double> pc =
        pc_weight_grads_at(f.net, f.x, r.states_at_last_grad, r.errors, f.y);
    WeightGrads<double> want = backprop_grads(f.net, f.x, f.y);
    const double lt = lambda * double(steps);
    for (std::size_t i = 0; i < f.net.num_hidden(); ++i) {
        for (auto& v : want.weight[i].data) v *= lt;
        for (auto& v : want.bias[i]) v *= lt;
    }
    CHECK(grads_rel_err(pc, want) <= 1e-3);
}

TEST_CASE("equilibrium grads: spc and epc agree, backprop does not") {
    Rng rng(7);
    Network<double> net = make_mlp<double>(std::vector<std::size_t>(9, 6),
                                           Activation::identity, Loss::mse,
                                           rng, 1.0);
    Matrix<double> x = oracles::random_matrix(4, 6, rng);
    Matrix<double> y = oracles::random_matrix(4, 6, rng);

    RelaxConfig<double> scfg;
    scfg.lr = 0.3;
    scfg.steps = 6000;
    scfg.record_every = 6000;
    SpcRelaxResult<double> rs = spc_relax(net, x, y, scfg);
    ErrorConfig<double> es = states_to_errors(net, x, rs.states);
    WeightGrads<double> g_spc = pc_weight_grads_at(net, x, rs.states, es, y);

    RelaxConfig<double> ecfg;
    ecfg.lr = 0.05;
    ecfg.steps = 1500;
    ecfg.record_every = 1500;
    EpcRelaxResult<double> re = epc_relax(net, x, y, ecfg);
    WeightGrads<double> g_epc =
        pc_weight_grads_at(net, x, re.states_at_last_grad, re.errors, y);

    for (std::size_t i = 0; i < g_spc.num_layers(); ++i)
        CHECK(max_abs(g_spc.weight[i] - g_epc.weight[i]) <= 1e-6);

    // distinctly not backprop: some layer's direction deviates measurably
    WeightGrads<double> bp = backprop_grads(net, x, y);
    double min_cos = 1.0;
    for (std::size_t i = 0; i < bp.num_layers(); ++i) {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t k = 0; k < bp.weight[i].size(); ++k) {
            dot += g_spc.weight[i].data[k] * bp.weight[i].data[k];
            na += g_spc.weight[i].data[k] * g_spc.weight[i].data[k];
            nb += bp.weight[i].data[k] * bp.weight[i].data[k];
        }
        min_cos = std::min(min_cos, dot / std::sqrt(na * nb));
    }
    CHECK(min_cos < 1.0 - 1e-3);
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

TEST_CASE("sgd step subtracts lr * grad exactly") {
    Rng rng(8);
    Network<double> net =
        oracles::random_net({2, 3, 2}, Activation::identity, Loss::mse, rng);
    Network<double> before = net;
    WeightGrads<double> g;
    for (const auto& l : net.layers) {
        g.weight.push_back(
            oracles::random_matrix(l.weight.rows, l.weight.cols, rng));
        Vector<double> b(l.bias.size());
        for (auto& v : b) v = rng.gaussian();
        g.bias.push_back(b);
    }
    Optimizer<double> opt;
    opt.kind = OptKind::sgd;
    opt.lr = 0.1;
    opt.step(net, g);
    for (std::size_t i = 0; i < net.layers.size(); ++i)
        for (std::size_t k = 0; k < net.layers[i].weight.size(); ++k)
            CHECK(net.layers[i].weight.data[k] ==
                  before.layers[i].weight.data[k] - 0.1 * g.weight[i].data[k]);
}

TEST_CASE("adam first step matches the hand-computed update") {
    Network<double> net;
    Layer<double> l;
    l.weight = Matrix<double>(1, 1);
    l.weight(0, 0) = 2.0;
    l.bias.assign(1, 0.5);
    net.layers.push_back(l);
    net.layers.push_back(l);
    net.loss = Loss::mse;

    WeightGrads<double> g;
    g.weight.assign(2, Matrix<double>(1, 1));
    g.bias.assign(2, Vector<double>(1, 0.0));
    g.weight[0](0, 0) = 0.3;
    g.weight[1](0, 0) = -0.7;
    g.bias[0][0] = 0.1;

    Optimizer<double> opt;
    opt.kind = OptKind::adam;
    opt.lr = 1e-2;
    opt.step(net, g);

    // first Adam step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps)
    auto expected = [&](double theta, double grad) {
        return theta - 1e-2 * grad / (std::sqrt(grad * grad) + 1e-8);
    };
    CHECK(net.layers[0].weight(0, 0) ==
          doctest::Approx(expected(2.0, 0.3)).epsilon(1e-12));
    CHECK(net.layers[1].weight(0, 0) ==
          doctest::Approx(expected(2.0, -0.7)).epsilon(1e-12));
    CHECK(net.layers[0].bias[0] ==
          doctest::Approx(expected(0.5, 0.1)).epsilon(1e-12));
    // zero gradient leaves the parameter where it was
    CHECK(net.layers[1].bias[0] == 0.5);
}

TEST_CASE("zero gradients leave parameters unchanged") {
    Rng rng(9);
    for (OptKind kind : {OptKind::sgd, OptKind::adam}) {
        Network<double> net = oracles::random_net(
            {2, 3, 2}, Activation::identity, Loss::mse, rng);
        Network<double> before = net;
        WeightGrads<double> g;
        for (const auto& l : net.layers) {
            g.weight.emplace_back(l.weight.rows, l.weight.cols);
            g.bias.emplace_back(l.bias.size(), 0.0);
        }
        Optimizer<double> opt;
        opt.kind = kind;
        opt.lr = 0.5;
        opt.step(net, g);
        for (std::size_t i = 0; i < net.layers.size(); ++i)
            CHECK(max_abs(net.layers[i].weight - before.layers[i].weight) ==
                  0.0);
    }
}

TEST_CASE("adamw applies decoupled weight decay") {
    Network<double> net;
    Layer<double> l;
    l.weight = Matrix<double>(1, 1);
    l.weight(0, 0) = 1.0;
    l.bias.assign(1, 0.0);
    net.layers.push_back(l);
    net.layers.push_back(l);

    WeightGrads<double> g;
    g.weight.assign(2, Matrix<double>(1, 1));
    g.bias.assign(2, Vector<double>(1, 0.0));

    Optimizer<double> opt;
    opt.kind = OptKind::adamw;
    opt.lr = 0.1;
    opt.weight_decay = 0.5;
    opt.step(net, g);
    // zero gradient, so only the decay term acts: 1 - 0.1*0.5
    CHECK(net.layers[0].weight(0, 0) == doctest::Approx(0.95).epsilon(1e-12));
}

TEST_CASE("lr schedule: warmup to 1.1x then cosine down to 0.1x") {
    const std::size_t total = 1000;
    CHECK(lr_schedule_scale(LrSchedule::constant, 500, total) == 1.0);
    CHECK(lr_schedule_scale(LrSchedule::warmup_cosine, 0, total) ==
          doctest::Approx(1.0));
    CHECK(lr_schedule_scale(LrSchedule::warmup_cosine, 100, total) ==
          doctest::Approx(1.1));
    CHECK(lr_schedule_scale(LrSchedule::warmup_cosine, 550, total) ==
          doctest::Approx(0.1 + 0.5 * (1.0 + std::cos(M_PI * 0.5)))
              .epsilon(1e-9));
    CHECK(lr_schedule_scale(LrSchedule::warmup_cosine, 1000, total) ==
          doctest::Approx(0.1).epsilon(1e-9));
}

// ---------------------------------------------------------------------------
// Training loop and evaluation
// ---------------------------------------------------------------------------

TEST_CASE("train with zero epochs changes nothing and returns no metrics") {
    Rng rng(10);
    Dataset ds = synthetic_gaussian(32, 4, 2, rng);
    Network<double> net =
        oracles::random_net({4, 6, 2}, Activation::tanh_fn, Loss::mse, rng);
    Network<double> before = net;
    TrainConfig cfg;
    cfg.epochs = 0;
    std::vector<EpochMetrics> m = train(net, ds, ds, cfg);
    CHECK(m.empty());
    for (std::size_t i = 0; i < net.layers.size(); ++i)
        CHECK(max_abs(net.layers[i].weight - before.layers[i].weight) == 0.0);
}

TEST_CASE("backprop separates two gaussian blobs almost perfectly") {
    Rng rng(11);
    Dataset ds = synthetic_gaussian(512, 8, 2, rng);
    Rng netrng(12);
    Network<double> net = make_mlp<double>({8, 8, 2}, Activation::identity,
                                           Loss::mse, netrng, 1.0);
    TrainConfig cfg;
    cfg.algorithm = TrainAlgo::backprop;
    cfg.weight_lr = 1e-2;
    cfg.epochs = 12;
    cfg.batch_size = 32;
    cfg.seed = 1;
    train(net, ds, ds, cfg);
    CHECK(evaluate(net, ds) >= 0.99);
}

TEST_CASE("spc and epc training improve over early epochs") {
    Rng rng(13);
    Dataset ds = synthetic_gaussian(256, 8, 4, rng);
    for (TrainAlgo algo : {TrainAlgo::spc, TrainAlgo::epc}) {
        Rng netrng(14);
        Network<double> net = make_mlp<double>({8, 12, 4}, Activation::tanh_fn,
                                               Loss::mse, netrng, 1.0);
        TrainConfig cfg;
        cfg.algorithm = algo;
        cfg.relax_lr = 0.1;
        cfg.relax_steps = 8;
        cfg.weight_lr = 2e-3;
        cfg.epochs = 3;
        cfg.batch_size = 32;
        cfg.seed = 7;
        std::vector<EpochMetrics> m = train(net, ds, ds, cfg);
        REQUIRE(m.size() == 3);
        CHECK(m.back().train_loss < m.front().train_loss);
        CHECK(m.back().val_accuracy >= m.front().val_accuracy);
    }
}

TEST_CASE("training is bitwise deterministic under a fixed seed") {
    Rng d1(15);
    Dataset ds = synthetic_gaussian(128, 6, 3, d1);
    auto run = [&]() {
        Rng netrng(16);
        Network<double> net = make_mlp<double>({6, 8, 3}, Activation::gelu,
                                               Loss::cross_entropy, netrng,
                                               std::nullopt);
        TrainConfig cfg;
        cfg.algorithm = TrainAlgo::epc;
        cfg.relax_lr = 0.05;
        cfg.relax_steps = 4;
        cfg.weight_lr = 1e-3;
        cfg.epochs = 2;
        cfg.batch_size = 16;
        cfg.seed = 99;
        train(net, ds, ds, cfg);
        return net;
    };
    Network<double> a = run();
    Network<double> b = run();
    for (std::size_t i = 0; i < a.layers.size(); ++i)
        for (std::size_t k = 0; k < a.layers[i].weight.size(); ++k)
            CHECK(a.layers[i].weight.data[k] == b.layers[i].weight.data[k]);
}

TEST_CASE("nan gradients abort with the batch index in the message") {
    Rng rng(17);
    Dataset ds = synthetic_gaussian(64, 4, 2, rng);
    Network<double> net =
        oracles::random_net({4, 4, 2}, Activation::identity, Loss::mse, rng);
    net.layers[0].weight(0, 0) = std::nan("");
    TrainConfig cfg;
    cfg.algorithm = TrainAlgo::backprop;
    cfg.epochs = 1;
    cfg.batch_size = 16;
    try {
        train(net, ds, ds, cfg);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("batch") != std::string::npos);
    }
}

TEST_CASE("evaluate: constant predictor scores 1/K on balanced data") {
    Rng rng(18);
    Dataset ds = balanced_dataset(10, 10, 6, rng);
    Network<double> net;
    Layer<double> l0;
    l0.weight = Matrix<double>(5, 6);
    l0.bias.assign(5, 0.0);
    Layer<double> l1;
    l1.weight = Matrix<double>(10, 5);
    l1.bias.assign(10, 0.0);
    l1.bias[3] = 1.0;  // always predicts class 3
    net.layers.push_back(l0);
    net.layers.push_back(l1);
    CHECK(evaluate(net, ds) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("evaluate matches a naive per-sample loop") {
    Rng rng(19);
    Dataset ds = synthetic_gaussian(100, 5, 3, rng);
    Network<double> net = make_mlp<double>({5, 7, 3}, Activation::tanh_fn,
                                           Loss::cross_entropy, rng,
                                           std::nullopt);
    const double got = evaluate(net, ds);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Matrix<double> x(1, 5);
        for (std::size_t j = 0; j < 5; ++j) x(0, j) = ds.images(i, j);
        Matrix<double> out = forward(net, x).y_hat;
        std::size_t best = 0;
        for (std::size_t j = 1; j < 3; ++j)
            if (out(0, j) > out(0, best)) best = j;
        if (int(best) == ds.labels[i]) ++correct;
    }
    CHECK(got == doctest::Approx(double(correct) / 100.0));
}

// ---------------------------------------------------------------------------
// Gradient trajectories
// ---------------------------------------------------------------------------

TEST_CASE("trajectory: epc step 1 is perfectly aligned with backprop") {
    Rng rng(20);
    Network<double> net = make_mlp<double>(std::vector<std::size_t>(8, 5),
                                           Activation::identity, Loss::mse,
                                           rng, 1.0);
    Matrix<double> x = oracles::random_matrix(3, 5, rng);
    Matrix<double> y = oracles::random_matrix(3, 5, rng);
    std::vector<TrajectoryPoint> traj =
        gradient_trajectory(net, x, y, TrainAlgo::epc, 2, 0.05);
    REQUIRE(traj.size() >= 2);
    for (double c : traj[1].cosine_to_backprop)
        CHECK(std::fabs(c - 1.0) <= 1e-9);
}

TEST_CASE("trajectory: spc deep layers stay at exactly zero until reached") {
    Rng rng(21);
    Network<double> net = make_mlp<double>(std::vector<std::size_t>(8, 5),
                                           Activation::identity, Loss::mse,
                                           rng, 1.0);
    const std::size_t nh = net.num_hidden();
    Matrix<double> x = oracles::random_matrix(2, 5, rng);
    Matrix<double> y = oracles::random_matrix(2, 5, rng);
    std::vector<TrajectoryPoint> traj =
        gradient_trajectory(net, x, y, TrainAlgo::spc, nh + 1, 0.1);

    // hidden layer i first feels its error at step nh - i
    for (std::size_t i = 0; i < nh; ++i) {
        for (std::size_t t = 0; t < nh - i; ++t)
            CHECK(traj[t].grad_norm[i] == 0.0);
        CHECK(traj[nh - i].grad_norm[i] > 0.0);
    }
    // the output layer is driven from step 0
    CHECK(traj[0].grad_norm[nh] > 0.0);
}

TEST_CASE("trajectory: both algorithms end at the analytic PC gradients") {
    Rng rng(22);
    Network<double> net = make_mlp<double>(std::vector<std::size_t>(7, 5),
                                           Activation::identity, Loss::mse,
                                           rng, 1.0);
    Matrix<double> x = oracles::random_matrix(2, 5, rng);
    Matrix<double> y = oracles::random_matrix(2, 5, rng);

    StateConfig<double> s_star = analytic_equilibrium_linear(net, x, y);
    ErrorConfig<double> e_star = states_to_errors(net, x, s_star);
    WeightGrads<double> want = pc_weight_grads_at(net, x, s_star, e_star, y);

    auto grads_at_end = [&](TrainAlgo algo, std::size_t steps, double lam) {
        if (algo == TrainAlgo::spc) {
            RelaxConfig<double> cfg;
            cfg.lr = lam;
            cfg.steps = steps;
            cfg.record_every = steps;
            SpcRelaxResult<double> r = spc_relax(net, x, y, cfg);
            return pc_weight_grads_at(net, x, r.states,
                                      states_to_errors(net, x, r.states), y);
        }
        RelaxConfig<double> cfg;
        cfg.lr = lam;
        cfg.steps = steps;
        cfg.record_every = steps;
        EpcRelaxResult<double> r = epc_relax(net, x, y, cfg);
        return pc_weight_grads_at(net, x, r.states_at_last_grad, r.errors, y);
    };
    WeightGrads<double> g_spc = grads_at_end(TrainAlgo::spc, 5000, 0.3);
    WeightGrads<double> g_epc = grads_at_end(TrainAlgo::epc, 800, 0.05);
    for (std::size_t i = 0; i < want.num_layers(); ++i) {
        CHECK(max_abs(g_spc.weight[i] - want.weight[i]) <= 1e-6);
        CHECK(max_abs(g_epc.weight[i] - want.weight[i]) <= 1e-6);
    }
}
