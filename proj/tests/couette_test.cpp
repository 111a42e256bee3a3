#include <doctest.h>

#include "spnn/couette.hpp"

#include <cmath>

using namespace spnn;
using namespace spnn::couette;

namespace {

double variance(const Vector& x) {
    const double m = x.mean();
    return (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
}

}  // namespace

TEST_CASE("dumbbell relaxation reaches unit variance") {
    const Eigen::Index K = 20000;
    const double We = 0.5, dt = 0.005;
    Vector qx = Vector::Zero(K), qy = Vector::Zero(K);
    const int steps = static_cast<int>(std::lround(10.0 * We / dt));
    for (int n = 0; n < steps; ++n) {
        auto rng = node_stream(5, 0, static_cast<std::uint64_t>(n));
        sde_step(qx, qy, 0.0, We, dt, rng);
    }
    CHECK(variance(qy) == doctest::Approx(1.0).epsilon(0.04));
    CHECK(variance(qx) == doctest::Approx(1.0).epsilon(0.04));
    CHECK(std::abs(qy.mean()) < 0.05);
}

TEST_CASE("drift-only update") {
    Vector qx(1), qy(1);
    qx << 1.0;
    qy << 2.0;
    sde_drift(qx, qy, 3.0, 1.0, 0.1);
    CHECK(qx(0) == doctest::Approx(1.0 + (6.0 - 0.5) * 0.1));
    CHECK(qy(0) == doctest::Approx(2.0 - 0.1));
    CHECK(polymer_stress(qx, qy, 0.5, 2.0) == doctest::Approx(0.25 * qx(0) * qy(0)));
    CHECK_THROWS(polymer_stress(Vector(), Vector(), 0.5, 1.0));
}

TEST_CASE("stress noise shrinks as 1/sqrt(K)") {
    Params p;
    p.Nx = 400;
    p.snapshots = 2;
    // Equilibrium ensembles at t = 0: the spread of tau across nodes is noise.
    auto spread = [&](int K) {
        p.K = K;
        const auto g = generate(p, 9);
        Vector tau(p.Nx);
        for (Eigen::Index j = 0; j < p.Nx; ++j) tau(j) = g.dataset.trajectory(j)(4, 0);
        return std::sqrt(variance(tau));
    };
    const double ratio = spread(250) / spread(1000);
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("Newtonian limit gives the linear profile") {
    Params p;
    p.eps = 0.0;
    p.Nx = 10;
    p.K = 1;
    p.snapshots = 300;
    p.dt = 0.01;
    const auto g = generate(p, 1);
    for (Eigen::Index j = 0; j < p.Nx; ++j) {
        CHECK(g.final_field.v(j) == doctest::Approx(1.0 - static_cast<double>(j) / p.Nx).epsilon(1e-6));
    }
    CHECK(g.wall_velocity.isZero(0.0));
    // Viscous heating only adds energy.
    for (Eigen::Index j = 0; j < p.Nx; ++j) {
        const auto t = g.dataset.trajectory(j);
        for (Eigen::Index n = 1; n < t.cols(); ++n) CHECK(t(3, n) >= t(3, n - 1));
    }
}

TEST_CASE("macro step above the CFL limit is rejected") {
    Params p;
    p.Nx = 100;
    CHECK_THROWS_AS(MacroSolver(p, 2.0 * p.cfl_limit()), CflError);
    CHECK_NOTHROW(MacroSolver(p, 0.5 * p.cfl_limit()));
    try {
        MacroSolver bad(p, 1.0);
        FAIL("expected CflError");
    } catch (const CflError& e) {
        CHECK(std::string(e.what()).find("CFL") != std::string::npos);
    }
}

TEST_CASE("generation") {
    Params p;
    p.Nx = 20;
    p.K = 200;
    p.snapshots = 30;
    const auto a = generate(p, 4);
    CHECK(a.dataset.shape_string() == "20x30x5");
    CHECK_NOTHROW(a.dataset.validate());
    CHECK(a.wall_velocity.isZero(0.0));
    CHECK(a.dataset.trajectory(0).row(2).isConstant(1.0));
    CHECK(generate(p, 4).dataset.values == a.dataset.values);
    CHECK(generate(p, 4, 3).dataset.values == a.dataset.values);
    CHECK(generate(p, 5).dataset.values != a.dataset.values);

    const Params back = params_from_manifest(a.dataset.manifest);
    CHECK(back.Nx == 20);
    CHECK(back.K == 200);
    CHECK(back.eps == 0.9);

    Params bad = p;
    bad.eps = 1.0;
    CHECK_THROWS(generate(bad, 1));
}
