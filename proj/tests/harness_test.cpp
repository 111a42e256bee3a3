#include <doctest.h>

#include "spnn/harness.hpp"

#include <cmath>

using namespace spnn;
using namespace spnn::harness;

namespace {

// Two-state net with H = z0 (softplus(z0) - softplus(-z0)), S = 0, M = 0 and
// L = [[0, 1], [-1, 0]].
nn::NetParams rotation_net() {
    nn::NetParams p;
    nn::Layer hidden;
    hidden.weight = Matrix::Zero(2, 2);
    hidden.weight(0, 0) = 1.0;
    hidden.weight(1, 0) = -1.0;
    hidden.bias = Vector::Zero(2);
    hidden.activation = nn::Activation::Softplus;
    nn::Layer head;
    head.weight = Matrix::Zero(10, 2);
    head.bias = Vector::Zero(10);
    head.bias(1) = 1.0;  // l(0, 1)
    head.weight(8, 0) = 1.0;
    head.weight(8, 1) = -1.0;
    head.activation = nn::Activation::Identity;
    p.layers = {hidden, head};
    return p;
}

data::Dataset tiny_pendulum(int n_traj, int snapshots, double horizon, std::uint64_t seed = 2) {
    DataSpec d;
    d.n_traj = n_traj;
    d.snapshots = snapshots;
    d.horizon = horizon;
    d.seed = seed;
    return make_dataset(d);
}

TrainConfig small_config(Formalism f) {
    TrainConfig c;
    c.formalism = f;
    c.epochs = 6;
    c.hidden_layers = 2;
    c.hidden_width = 8;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_CASE("loss weighting") {
    ad::Graph g;
    TrainConfig cfg;
    const auto t = combine_losses(g.constant_scalar(2.0), g.constant_scalar(0.0), g.constant_scalar(4.0), cfg,
                                  Formalism::Generic);
    const auto v = values(t);
    CHECK(v.total == doctest::Approx(200.00004));
    CHECK(*v.degen == 0.0);
    const auto s = values(combine_losses(g.constant_scalar(2.0), {}, g.constant_scalar(4.0), cfg,
                                         Formalism::SingleGenerator));
    CHECK(!s.degen);
    CHECK(s.total == doctest::Approx(200.00004));
    Vector a(3), b(3);
    a << 1, 2, 3;
    b << 1, 2, 3;
    CHECK(data_loss(g.input(a), g.constant_vector(b)).scalar() == 0.0);
    b(2) = 5;
    CHECK(data_loss(g.input(a), g.constant_vector(b)).scalar() == 4.0);
}

TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.scheduler().milestones == std::vector<long long>{4000, 8000});
    c.epochs = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.train_fraction = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.hidden_width = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("rollout stubs") {
    SUBCASE("zero network keeps the state") {
        const auto p = nn::init_kaiming(nn::mlp_layout(3, 2, 4, bracket::head_width(3, Formalism::Generic)), 1).zeros_like();
        Vector z0(3);
        z0 << 0.5, -1.0, 2.0;
        const Rollout r = rollout(p, z0, 5, 0.1, Formalism::Generic);
        CHECK(r.failure_step == -1);
        CHECK(r.states.cols() == 5);
        for (Eigen::Index n = 0; n < 5; ++n) CHECK(r.states.col(n) == z0);
    }
    SUBCASE("rotation by L") {
        const Rollout r = rollout(rotation_net(), Vector::Zero(2), 3, 0.2, Formalism::Generic);
        CHECK(r.states(0, 1) == doctest::Approx(0.0));
        CHECK(r.states(1, 1) == doctest::Approx(-0.2));
        CHECK(r.states(1, 2) == doctest::Approx(-0.4));
        CHECK(r.reversible_norm[0] == doctest::Approx(1.0));
        CHECK(r.dissipative_norm[0] == 0.0);
        CHECK(trivial_solution(median(r.dissipative_norm), median(r.reversible_norm)));
    }
    SUBCASE("non-finite step is reported, not thrown") {
        auto p = rotation_net();
        p.layers[1].bias(1) = 1e308;
        const Rollout r = rollout(p, Vector::Zero(2), 4, 1e10, Formalism::Generic);
        CHECK(r.failure_step == 1);
        CHECK(r.states.cols() == 1);
    }
    CHECK_THROWS(rollout(rotation_net(), Vector::Zero(2), 0, 0.1, Formalism::Generic));
}

TEST_CASE("rollout first step equals teacher forcing") {
    const auto ds = tiny_pendulum(2, 10, 3.0);
    for (Formalism f : {Formalism::Generic, Formalism::SingleGenerator}) {
        const auto p = nn::init_kaiming(nn::mlp_layout(10, 2, 8, bracket::head_width(10, f)), 4);
        const auto block = ds.trajectory(1);
        ad::Graph g;
        const Transition tr = build_transition(g, p, block.leftCols(ds.n_time - 1), ds.dt, f);
        const Rollout r = rollout(p, block.col(0), 2, ds.dt, f);
        CHECK((r.states.col(1) - tr.next.value().col(0)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("training") {
    const auto ds = tiny_pendulum(3, 10, 3.0);
    const data::Split split{{0}, {1, 2}};

    SUBCASE("epoch-0 loss matches an independent evaluation") {
        for (Formalism f : {Formalism::Generic, Formalism::SingleGenerator}) {
            const TrainConfig cfg = small_config(f);
            const auto res = train(ds, cfg, split);
            REQUIRE(res.status == TrainStatus::Ok);
            const auto v = teacher_forced_loss(res.initial, ds, {0}, cfg);
            CHECK(res.metrics.curves.total[0] == doctest::Approx(v.total).epsilon(1e-12));
            CHECK(res.metrics.curves.data[0] == doctest::Approx(v.data).epsilon(1e-12));
            CHECK(res.metrics.curves.data.size() == 6);
            CHECK(res.metrics.curves.degen.size() == (f == Formalism::Generic ? 6u : 0u));
        }
    }
    SUBCASE("zero learning rate leaves the parameters at init") {
        TrainConfig cfg = small_config(Formalism::Generic);
        cfg.base_lr = 0.0;
        const auto res = train(ds, cfg, split);
        for (std::size_t i = 0; i < res.params.layers.size(); ++i) {
            CHECK((res.params.layers[i].weight.array() == res.initial.layers[i].weight.array()).all());
        }
        CHECK(res.metrics.curves.data.front() == res.metrics.curves.data.back());
    }
    SUBCASE("zero epochs") {
        TrainConfig cfg = small_config(Formalism::Generic);
        cfg.epochs = 0;
        const auto res = train(ds, cfg, split);
        CHECK(res.status == TrainStatus::Ok);
        CHECK(res.metrics.curves.data.empty());
        CHECK(res.epochs_run == 0);
    }
    SUBCASE("monitoring does not change the single-generator run") {
        TrainConfig a = small_config(Formalism::SingleGenerator), b = a;
        b.monitor_degeneracy = false;
        const auto ra = train(ds, a, split), rb = train(ds, b, split);
        for (std::size_t i = 0; i < ra.params.layers.size(); ++i) {
            CHECK((ra.params.layers[i].weight.array() == rb.params.layers[i].weight.array()).all());
        }
        CHECK(ra.metrics.checkpoints.empty());
    }
    SUBCASE("GENERIC checkpoints at init, milestones and the end") {
        const auto res = train(ds, small_config(Formalism::Generic), split);
        REQUIRE(res.metrics.checkpoints.size() == 4);
        CHECK(res.metrics.checkpoints[0].epoch == 0);
        CHECK(res.metrics.checkpoints[1].epoch == 2);
        CHECK(res.metrics.checkpoints[3].epoch == 6);
        CHECK(res.milestones.back().epoch == 6);
    }
    SUBCASE("identical runs are bit identical") {
        const auto a = train(ds, small_config(Formalism::Generic), split);
        const auto b = train(ds, small_config(Formalism::Generic), split);
        CHECK(a.metrics.curves.total == b.metrics.curves.total);
        for (std::size_t i = 0; i < a.params.layers.size(); ++i) {
            CHECK((a.params.layers[i].weight.array() == b.params.layers[i].weight.array()).all());
        }
    }
    SUBCASE("divergence aborts with partial metrics") {
        TrainConfig cfg = small_config(Formalism::Generic);
        cfg.divergence_threshold = 1e-30;
        const auto res = train(ds, cfg, split);
        CHECK(res.status == TrainStatus::Diverged);
        CHECK(!res.message.empty());
    }
    CHECK_THROWS(train(ds, small_config(Formalism::Generic), data::Split{{}, {0}}));
    CHECK_THROWS(train(ds, small_config(Formalism::Generic), data::Split{{7}, {0}}));
}

TEST_CASE("evaluation") {
    data::Dataset ds(data::System::Couette, 0.1, 2, 4, 5);
    for (Eigen::Index i = 0; i < 2; ++i) {
        auto t = ds.trajectory(i);
        t.setConstant(0.5);
    }
    const auto zero = nn::init_kaiming(nn::mlp_layout(5, 1, 3, bracket::head_width(5, Formalism::Generic)), 1).zeros_like();
    const auto energy = system_energy(ds);

    const auto exact = evaluate(zero, ds, {0, 1}, Formalism::Generic, energy);
    CHECK(exact.failed_rollouts == 0);
    CHECK(exact.mse_per_variable.isZero(0.0));
    CHECK(exact.median_mse == 0.0);
    CHECK(exact.median_energy_error == 0.0);

    // Truth jumps by one after the first snapshot.
    ds.trajectory(1).rightCols(3).array() += 1.0;
    const auto off = evaluate(zero, ds, {1}, Formalism::Generic, energy);
    CHECK(off.mse_per_variable.isConstant(1.0));
    CHECK(off.median_mse == doctest::Approx(1.0));
    CHECK(off.median_energy_error == doctest::Approx(1.0));

    CHECK_THROWS_AS(evaluate(zero, ds, {5}, Formalism::Generic, energy), std::out_of_range);
}

TEST_CASE("statistics helpers") {
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 2, 3}) == 2.5);
    CHECK(std::isnan(median({})));
    CHECK(spearman({1, 2, 3}, {10, 20, 30}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 2, 3}, {5, 5, 5}) == 0.0);
    CHECK(spearman({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8));
    CHECK_THROWS(spearman({1}, {1}));
    CHECK(trivial_solution(0.0, 1.0));
    CHECK(!trivial_solution(1e-3, 1.0));
}

TEST_CASE("sweep") {
    SweepSpec s;
    s.base_train = small_config(Formalism::Generic);
    s.base_train.epochs = 2;
    s.base_data.n_traj = 2;
    s.base_data.n_test = 1;
    s.base_data.snapshots = 6;
    s.base_data.horizon = 1.8;
    s.widths = {4, 6, 8};
    const auto cells = s.cells();
    REQUIRE(cells.size() == 6);
    CHECK(cells[0].id == "generic_ep2_lr0.0001_w4_nt6_ntraj2");

    const auto rows = sweep(s, 2);
    REQUIRE(rows.size() == 6);
    for (const auto& r : rows) {
        CHECK(r.ok);
        CHECK(r.test_mse.size() == 1);
    }

    // A one-cell sweep equals training and evaluating by hand.
    const auto ds = make_dataset(cells[1].data);
    const auto split = cell_split(cells[1].data, ds, cells[1].train);
    CHECK(split.test == std::vector<Eigen::Index>{0});
    CHECK(split.train == std::vector<Eigen::Index>{1, 2});
    const auto tr = train(ds, cells[1].train, split);
    const auto m = evaluate(tr.params, ds, split.test, cells[1].train.formalism, system_energy(ds));
    CHECK(rows[1].metrics.median_mse == m.median_mse);
    CHECK(rows[1].metrics.curves.total == tr.metrics.curves.total);

    const std::string csv = sweep_csv(rows);
    CHECK(csv.find("generic_ep2_lr0.0001_w6_nt6_ntraj2") != std::string::npos);
    CHECK(csv.find("single_ep2") != std::string::npos);
}

TEST_CASE("export") {
    const auto ds = tiny_pendulum(3, 10, 3.0);
    const TrainConfig cfg = small_config(Formalism::Generic);
    const auto tr = train(ds, cfg, data::Split{{0}, {1, 2}});
    auto m = evaluate(tr.params, ds, tr.split.test, cfg.formalism, system_energy(ds));
    m.curves = tr.metrics.curves;
    std::string csv = csv_header();
    append_csv(csv, "r1", "c", m);
    CHECK(csv.rfind("run_id,cell,metric,trajectory,variable,value\n", 0) == 0);
    CHECK(csv.find("r1,c,loss_data,,0,") != std::string::npos);
    const std::string js = summary_json("r1", cfg, m, &tr);
    CHECK(js.find("\"run_id\"") != std::string::npos);
    CHECK(js.find("\"formalism\"") != std::string::npos);
}
