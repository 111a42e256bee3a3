// Acceptance checks. Usage: acceptance <criterion 1-8>
// Prints one line "criterion N: PASS|FAIL <detail>" and exits 0 on PASS.

#include "cli.hpp"
#include "spnn/bracket.hpp"
#include "spnn/couette.hpp"
#include "spnn/harness.hpp"
#include "spnn/io.hpp"
#include "spnn/pendulum.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace spnn;
using harness::Formalism;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix normal(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> n(0.0, sd);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

// ---------------------------------------------------------------------------

struct FdResult {
    double worst = 0.0;
    long checked = 0;
    // Entries under the rounding floor, compared in absolute terms.
    long floored = 0;
    double worst_floored = 0.0;  // |numeric - analytic| / floor
};

// Central differences against the analytic gradient, relative error with the
// max(|a|, 1e-8) denominator. A loss summed over hundreds of terms carries
// about 100 eps_mach |f| of rounding, i.e. floor = 100 eps_mach |f| / eps on
// the difference quotient. Entries with floor > tol |a| cannot be resolved
// relatively in float64; those must agree within the floor instead.
void fd_check(ad::Var f, std::span<const ad::Var> leaves, double eps, double tol, FdResult& r) {
    ad::Graph& g = f.graph();
    const auto grads = g.gradient(f, leaves);
    std::vector<Matrix> analytic;
    for (const auto& v : grads) analytic.push_back(v.value());
    const double floor = 100.0 * std::numeric_limits<double>::epsilon() * std::abs(f.scalar()) / eps;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const Matrix base = leaves[li].value();
        for (Eigen::Index k = 0; k < base.size(); ++k) {
            Matrix probe = base;
            probe(k) = base(k) + eps;
            g.set_leaf_value(leaves[li].id(), probe);
            g.reevaluate();
            const double fp = f.scalar();
            probe(k) = base(k) - eps;
            g.set_leaf_value(leaves[li].id(), probe);
            g.reevaluate();
            const double fm = f.scalar();
            g.set_leaf_value(leaves[li].id(), base);
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[li](k);
            if (floor > tol * std::max(std::abs(a), 1e-8)) {
                r.worst_floored = std::max(r.worst_floored, std::abs(numeric - a) / floor);
                ++r.floored;
            } else {
                r.worst = std::max(r.worst, std::abs(numeric - a) / std::max(std::abs(a), 1e-8));
                ++r.checked;
            }
        }
    }
    g.reevaluate();
}

void differentiation(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> layers(1, 3), width(4, 16), dims(2, 4);
    FdResult first, second;
    for (int trial = 0; trial < 100; ++trial) {
        const Formalism f = trial % 2 == 0 ? Formalism::Generic : Formalism::SingleGenerator;
        const Eigen::Index d = dims(rng);
        auto params = nn::init_kaiming(nn::mlp_layout(d, layers(rng), width(rng), bracket::head_width(d, f)),
                                       static_cast<std::uint64_t>(trial));
        for (auto& l : params.layers) l.bias = normal(l.bias.size(), 1, rng, 0.1);
        // A smaller head keeps |L|, |M| near one. With rates far above |z| the
        // Euler step cancels digits and the difference quotient drowns in
        // rounding even though the analytic gradient is fine.
        params.layers.back().weight *= 0.1;
        const Matrix states = normal(d, 3, rng);

        // (a) weighted network outputs wrt the input states.
        {
            ad::Graph g;
            const auto net = nn::bind(g, params);
            ad::Var z = g.input(states);
            ad::Var out = nn::forward(net, z);
            const Matrix w = normal(out.value().rows(), out.value().cols(), rng);
            ad::Var s = ad::sum(ad::cwise_product(g.constant_matrix(w), out));
            const ad::Var leaves[] = {z};
            fd_check(s, leaves, 1e-6, 1e-6, first);
        }
        // (b) total training loss wrt every parameter. The loss contains
        // grad_z of the energies, so these are second-order paths. Targets sit
        // near the prediction so the loss stays O(1) relative to its slopes.

        {
            ad::Graph g;
            harness::TrainConfig cfg;
            cfg.formalism = f;
            const auto tr = harness::build_transition(g, params, states, 0.3, f);
            const Matrix truth = tr.next.value() + normal(d, 3, rng, 0.01);
            const auto terms = harness::losses(tr, g.constant_matrix(truth), cfg);
            const auto leaves = tr.net.all();
            fd_check(terms.total, leaves, 1e-6, 1e-5, second);
        }
    }
    const double secs = seconds_since(t0);
    auto report = [&](const char* what, const FdResult& r) {
        o.detail << what << ": worst relative error " << fmt(r.worst) << " on " << r.checked << " entries, "
                 << r.floored << " entries under the rounding floor within " << fmt(r.worst_floored) << " floors; ";
    };
    report("outputs/inputs", first);
    report("loss/parameters", second);
    o.detail << "100 networks in " << fmt(secs) << " s";
    o.require(first.worst < 1e-6, "first order < 1e-6");
    o.require(second.worst < 1e-5, "second order < 1e-5");
    o.require(first.worst_floored <= 1.0 && second.worst_floored <= 1.0, "floored entries agree within rounding");
    o.require(secs < 60.0, "runtime < 1 min");
}

// ---------------------------------------------------------------------------

void structure(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(202);
    double worst_skew = 0.0, worst_psd = 0.0, worst_cancel = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Index d = 2 + trial % 9;
        ad::Graph g;
        const auto ops = bracket::assemble(
            bracket::split_head(g.input(normal(bracket::head_width(d, Formalism::Generic), 1, rng)), d, Formalism::Generic));
        const Matrix L = bracket::unpack(ops.L.value(), 0, d);
        const Matrix M = bracket::unpack(ops.M.value(), 0, d);
        worst_skew = std::max(worst_skew, (L + L.transpose()).cwiseAbs().maxCoeff());
        for (int probe = 0; probe < 100; ++probe) {
            const Vector x = normal(d, 1, rng);
            // Scaled so that 1 means the tolerance is just met.
            worst_psd = std::max(worst_psd, -x.dot(M * x) / (1e-12 * x.squaredNorm() * M.norm()));
            worst_cancel = std::max(worst_cancel, std::abs(x.dot(L * x)) / (1e-12 * x.squaredNorm() * L.norm()));
        }
    }
    o.detail << "max |L+L^T| " << fmt(worst_skew) << ", worst x^T M x / tolerance " << fmt(worst_psd)
             << ", worst g^T L g / tolerance " << fmt(worst_cancel) << " over 1000 heads in " << fmt(seconds_since(t0))
             << " s";
    o.require(worst_skew == 0.0, "L exactly skew");
    o.require(worst_psd <= 1.0, "M positive semidefinite");
    o.require(worst_cancel <= 1.0, "g^T L g cancels");
}

// ---------------------------------------------------------------------------

std::vector<double> pendulum_drifts(const pendulum::Params& p, const data::Dataset& ds) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < ds.n_traj; ++i) {
        const Vector e = pendulum::total_energy(p, ds.trajectory(i));
        out.push_back((e.array() - e(0)).abs().maxCoeff() / std::abs(e(0)));
    }
    return out;
}

void pendulum_generator(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const pendulum::Params p;
    pendulum::GenerateSpec spec;
    spec.seed = 303;
    spec.substeps = 20;
    const auto a = pendulum::generate(p, spec);
    spec.substeps = 40;
    const auto b = pendulum::generate(p, spec);

    const auto da = pendulum_drifts(p, a.dataset), db = pendulum_drifts(p, b.dataset);
    double worst_drift = 0.0, worst_entropy = 0.0;
    std::vector<double> ratios;
    for (std::size_t i = 0; i < da.size(); ++i) {
        worst_drift = std::max(worst_drift, da[i]);
        ratios.push_back(da[i] / db[i]);
        const auto t = a.dataset.trajectory(static_cast<Eigen::Index>(i));
        for (Eigen::Index n = 1; n < t.cols(); ++n) {
            worst_entropy = std::max(worst_entropy, (t(8, n - 1) + t(9, n - 1)) - (t(8, n) + t(9, n)));
        }
    }
    const double ratio = harness::median(ratios);
    o.detail << a.dataset.shape_string() << ", max relative energy drift " << fmt(worst_drift)
             << ", largest entropy decrease " << fmt(worst_entropy) << ", median drift ratio 20->40 substeps "
             << fmt(ratio) << " (min " << fmt(*std::min_element(ratios.begin(), ratios.end())) << "), "
             << fmt(seconds_since(t0)) << " s";
    o.require(a.dataset.n_traj == 50 && a.dataset.n_time == 200, "50 x 200 trajectories");
    o.require(worst_drift < 1e-3, "drift < 1e-3");
    o.require(worst_entropy <= 1e-10, "entropy non-decreasing");
    // Fourth order: doubling the substeps cuts the error by 2^4.
    o.require(ratio > 16.0 / 1.25 && ratio < 16.0 * 1.25, "drift ratio 16 within 25%");
    o.require(seconds_since(t0) < 120.0, "runtime < 2 min");
}

// ---------------------------------------------------------------------------

void couette_generator(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    // Zero shear (V = 0): dumbbells are pure OU processes. Started from the
    // origin, <q_y^2>(t) = 1 - exp(-t / We).
    const Eigen::Index K = 10000;
    const double We = 1.0, dt = 0.0067;
    const int steps = static_cast<int>(std::ceil(10.0 * We / dt));
    Vector qx = Vector::Zero(K), qy = Vector::Zero(K);
    for (int n = 1; n <= steps; ++n) {
        auto rng = couette::node_stream(404, 0, static_cast<std::uint64_t>(n));
        couette::sde_step(qx, qy, 0.0, We, dt, rng);
    }
    const double qy2 = qy.squaredNorm() / static_cast<double>(K);

    // Same check through the full generator.
    couette::Params zp;
    zp.V = 0.0;
    zp.Nx = 3;
    zp.K = 10000;
    zp.snapshots = steps + 1;
    const auto z = couette::generate(zp, 404);
    double gen_lo = 1e9, gen_hi = -1e9;
    for (Eigen::Index j = 0; j < z.final_ensemble.qy.cols(); ++j) {
        const double m = z.final_ensemble.qy.col(j).squaredNorm() / static_cast<double>(zp.K);
        gen_lo = std::min(gen_lo, m);
        gen_hi = std::max(gen_hi, m);
    }

    // Monte Carlo noise of tau across independent equilibrium nodes.
    auto tau_sd = [](int k) {
        couette::Params p;
        p.Nx = 400;
        p.K = k;
        p.snapshots = 2;
        const auto g = couette::generate(p, 405);
        Vector tau(p.Nx);
        for (Eigen::Index j = 0; j < p.Nx; ++j) tau(j) = g.dataset.trajectory(j)(4, 0);
        return std::sqrt((tau.array() - tau.mean()).square().sum() / static_cast<double>(p.Nx - 1));
    };
    const double halving = tau_sd(2500) / tau_sd(10000);

    // Newtonian limit: steady profile v = V (1 - y).
    couette::Params np;
    np.eps = 0.0;
    np.K = 1;
    np.snapshots = 300;
    const auto n = couette::generate(np, 406);
    double lin = 0.0;
    for (Eigen::Index j = 0; j <= np.Nx; ++j) {
        lin = std::max(lin, std::abs(n.final_field.v(j) - np.V * (1.0 - static_cast<double>(j) / np.Nx)));
    }

    o.detail << "<q_y^2> at t=10 We: " << fmt(qy2) << " (generator nodes " << fmt(gen_lo) << ".." << fmt(gen_hi)
             << "), tau sd ratio K/4K " << fmt(halving) << ", Newtonian profile error " << fmt(lin) << ", "
             << fmt(seconds_since(t0)) << " s";
    o.require(qy2 >= 0.95 && qy2 <= 1.05, "<q_y^2> in [0.95, 1.05]");
    o.require(gen_lo >= 0.95 && gen_hi <= 1.05, "generator <q_y^2> in [0.95, 1.05]");
    o.require(halving >= 2.0 * 0.8 && halving <= 2.0 * 1.2, "sd halves within 20%");
    o.require(lin < 1e-3, "linear within 1e-3");
    o.require(seconds_since(t0) < 120.0, "runtime < 2 min");
}

// ---------------------------------------------------------------------------
// Desk-scale pendulum setting shared by criteria 5 to 7.

harness::DataSpec desk_data() {
    harness::DataSpec d;
    d.n_traj = 10;
    d.n_test = 3;
    d.snapshots = 50;
    d.horizon = 15.0;  // keeps the published 0.3 s snapshot spacing
    d.seed = 505;
    return d;
}

harness::TrainConfig desk_train(Formalism f) {
    harness::TrainConfig c;
    c.formalism = f;
    c.epochs = 2000;
    c.base_lr = 1e-4;
    c.hidden_layers = 3;
    c.hidden_width = 64;
    c.seed = 505;
    return c;
}

struct DeskRun {
    harness::TrainResult train;
    harness::RunMetrics test;
    double seconds = 0.0;
};

DeskRun desk_run(const data::Dataset& ds, const harness::TrainConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    DeskRun r;
    r.train = harness::train(ds, cfg, harness::cell_split(desk_data(), ds, cfg));
    if (r.train.status == harness::TrainStatus::Ok) {
        r.test = harness::evaluate(r.train.params, ds, r.train.split.test, cfg.formalism, harness::system_energy(ds));
    }
    r.seconds = seconds_since(t0);
    return r;
}

void desk_training(Outcome& o) {
    const auto ds = harness::make_dataset(desk_data());
    for (Formalism f : {Formalism::Generic, Formalism::SingleGenerator}) {
        const auto cfg = desk_train(f);
        const DeskRun r = desk_run(ds, cfg);
        const std::string name = bracket::formalism_name(f);
        o.detail << " " << name << ":";
        const bool ok = r.train.status == harness::TrainStatus::Ok;
        o.require(ok, name + " no divergence");
        if (!ok) {
            o.detail << " diverged (" << r.train.message << ")";
            continue;
        }
        const auto& curve = r.train.metrics.curves.data;
        const double final_data = harness::teacher_forced_loss(r.train.params, ds, r.train.split.train, cfg).data;
        const double ratio = final_data / curve.front();
        o.detail << " L_data " << fmt(curve.front()) << " -> " << fmt(final_data) << " (x" << fmt(ratio) << "),";
        o.require(ratio < 0.1, name + " L_data < 10% of epoch 0");

        std::ostringstream fails;
        for (const auto& t : r.test.trajectories) {
            if (t.failure_step >= 0) fails << " traj " << t.trajectory << " at step " << t.failure_step;
        }
        o.detail << " failed test rollouts " << r.test.failed_rollouts << "/" << r.test.trajectories.size()
                 << fails.str() << ",";
        o.require(r.test.failed_rollouts == 0, name + " all test rollouts finite");

        if (f == Formalism::Generic) {
            const double before = harness::median(harness::teacher_forced_degeneracy(r.train.initial, ds, r.train.split.train));
            const double after = harness::median(harness::teacher_forced_degeneracy(r.train.params, ds, r.train.split.train));
            o.detail << " degeneracy median " << fmt(before) << " -> " << fmt(after) << " (/" << fmt(before / after) << "),";
            o.require(before >= 10.0 * after, "degeneracy median drops 10x");
        }
        o.detail << " " << fmt(r.seconds) << " s";
        o.require(r.seconds < 1800.0, name + " runtime < 30 min");
    }
}

// ---------------------------------------------------------------------------

struct Trend {
    std::vector<double> medians;
    std::vector<int> failed;
    double rho = 0.0;
    bool finite = true;
};

Trend trend(const std::vector<harness::SweepRow>& rows, Formalism f) {
    Trend t;
    std::vector<double> xs;
    for (const auto& r : rows) {
        if (r.cell.train.formalism != f) continue;
        xs.push_back(static_cast<double>(xs.size()));
        // Failed rollouts enter as +inf.
        const double m = r.ok ? harness::median(r.test_mse) : std::numeric_limits<double>::infinity();
        t.medians.push_back(m);
        t.failed.push_back(r.ok ? r.metrics.failed_rollouts : -1);
        t.finite = t.finite && std::isfinite(m);
    }
    t.rho = harness::spearman(xs, t.medians);
    return t;
}

void print_trend(std::ostream& os, const Trend& t) {
    os << "medians";
    for (std::size_t i = 0; i < t.medians.size(); ++i) os << " " << fmt(t.medians[i]) << "(" << t.failed[i] << " failed)";
    os << " rho " << fmt(t.rho);
}

void trends(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    harness::SweepSpec by_traj;
    by_traj.base_train = desk_train(Formalism::Generic);
    by_traj.base_data = desk_data();
    by_traj.base_data.n_test = 5;
    by_traj.trajectories = {4, 8, 16};
    const auto rows_traj = harness::sweep(by_traj);

    harness::SweepSpec by_snap = by_traj;
    by_snap.trajectories = {};
    by_snap.base_data.n_traj = 10;
    by_snap.snapshots = {25, 50, 100};
    const auto rows_snap = harness::sweep(by_snap);

    bool traj_ok = false, snap_ok = false;
    for (Formalism f : {Formalism::Generic, Formalism::SingleGenerator}) {
        const Trend a = trend(rows_traj, f), b = trend(rows_snap, f);
        o.detail << " " << bracket::formalism_name(f) << " trajectories {4,8,16}: ";
        print_trend(o.detail, a);
        o.detail << "; snapshots {25,50,100}: ";
        print_trend(o.detail, b);
        o.detail << ";";
        // A trend on infinite medians would be decided by ties, not data.
        traj_ok = traj_ok || (a.finite && a.rho <= 0.0);
        snap_ok = snap_ok || (b.finite && b.rho >= 0.0);
    }
    o.detail << " " << fmt(seconds_since(t0)) << " s";
    o.require(traj_ok, "error non-increasing in trajectory count for one formalism");
    o.require(snap_ok, "error non-decreasing in snapshot count for one formalism");
}

// ---------------------------------------------------------------------------

void trivial_detector(Outcome& o) {
    const auto ds = harness::make_dataset(desk_data());
    const auto energy = harness::system_energy(ds);

    const DeskRun generic = desk_run(ds, desk_train(Formalism::Generic));
    o.require(generic.train.status == harness::TrainStatus::Ok, "criterion-5 GENERIC run trains");
    if (generic.train.status != harness::TrainStatus::Ok) return;

    // Synthetic checkpoint: zero the head rows that produce m, so M = 0.
    nn::NetParams zeroed = generic.train.params;
    const Eigen::Index d2 = ds.dim * ds.dim;
    auto& head = zeroed.layers.back();
    head.weight.middleRows(d2, d2).setZero();
    head.bias.segment(d2, d2).setZero();
    const auto synthetic = harness::evaluate(zeroed, ds, generic.train.split.test, Formalism::Generic, energy);
    o.detail << "m=0 checkpoint: flag " << synthetic.trivial_solution << " (|M dS| median " << fmt(synthetic.median_dissipative)
             << ", |L dH| median " << fmt(synthetic.median_reversible) << ");";
    o.require(synthetic.trivial_solution, "fires on m = 0");

    o.detail << " criterion-5 runs: generic flag " << generic.test.trivial_solution << " (ratio "
             << fmt(generic.test.median_dissipative / generic.test.median_reversible) << ")";
    o.require(!generic.test.trivial_solution, "silent on criterion-5 GENERIC");
    const DeskRun single = desk_run(ds, desk_train(Formalism::SingleGenerator));
    if (single.train.status == harness::TrainStatus::Ok) {
        o.detail << ", single flag " << single.test.trivial_solution << " (ratio "
                 << fmt(single.test.median_dissipative / single.test.median_reversible) << ");";
        o.require(!single.test.trivial_solution, "silent on criterion-5 single");
    } else {
        o.require(false, "criterion-5 single run trains");
    }

    auto fast = desk_train(Formalism::Generic);
    fast.base_lr = 1e-3;
    const DeskRun high = desk_run(ds, fast);
    if (high.train.status == harness::TrainStatus::Ok) {
        o.detail << " lr=1e-3 GENERIC: flag " << high.test.trivial_solution << " (|M dS| median "
                 << fmt(high.test.median_dissipative) << ", |L dH| median " << fmt(high.test.median_reversible)
                 << ", failed rollouts " << high.test.failed_rollouts << ")";
    } else {
        o.detail << " lr=1e-3 GENERIC: diverged after " << high.train.epochs_run << " epochs";
    }
}

// ---------------------------------------------------------------------------

int cli(const std::vector<std::string>& args) {
    std::vector<std::string> own{"spnn"};
    own.insert(own.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : own) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Runs the full command set into `root`.
bool pipeline(const fs::path& root, const std::string& jobs) {
    fs::remove_all(root);
    const std::string p = (root / "pendulum").string(), c = (root / "couette").string();
    const std::string data = (root / "pendulum" / "pendulum.dataset").string();
    bool ok = cli({"gen-pendulum", "--set", "gen.n_traj=6", "--set", "gen.horizon=6", "--seed", "808", "--jobs", jobs,
                   "--out", p}) == 0;
    ok = ok && cli({"gen-couette", "--set", "couette.Nx=10", "--set", "couette.K=500", "--set", "couette.snapshots=20",
                    "--seed", "808", "--jobs", jobs, "--out", c}) == 0;
    const std::vector<std::string> small = {"--set", "train.epochs=6", "--set", "train.hidden_layers=2", "--set",
                                            "train.hidden_width=8", "--seed", "808"};
    for (const char* f : {"generic", "single"}) {
        std::vector<std::string> a = {"train", "--dataset", data, "--formalism", f, "--out", (root / ("train_" + std::string(f))).string()};
        a.insert(a.end(), small.begin(), small.end());
        ok = ok && cli(a) == 0;
        ok = ok && cli({"eval", "--dataset", data, "--checkpoint", (root / ("train_" + std::string(f)) / "model.ckpt").string(),
                        "--out", (root / ("eval_" + std::string(f))).string()}) == 0;
    }
    ok = ok && cli({"sweep", "--set", "sweep.widths=4,6", "--set", "data.n_traj=3", "--set", "data.n_test=2", "--set",
                    "data.snapshots=8", "--set", "data.horizon=2.4", "--set", "train.epochs=3", "--set",
                    "train.hidden_layers=1", "--seed", "808", "--jobs", jobs, "--out", (root / "sweep").string()}) == 0;
    return ok;
}

void determinism(Outcome& o) {
    const fs::path base = fs::temp_directory_path() / "spnn_acceptance_determinism";
    const bool ok = pipeline(base / "a", "1") && pipeline(base / "b", "1") && pipeline(base / "c", "3");
    o.require(ok, "all commands succeed");
    if (!ok) return;
    int compared = 0, differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(base / "a")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), base / "a");
        if (rel.filename() == "run_record.json") continue;  // records its own output paths
        for (const char* other : {"b", "c"}) {
            ++compared;
            if (slurp(e.path()) != slurp(base / other / rel)) {
                ++differing;
                o.detail << " differs: " << other << "/" << rel.string();
            }
        }
    }
    o.detail << " " << compared << " file comparisons (repeat and 3-thread run), " << differing << " differ";
    o.require(compared > 0 && differing == 0, "bit-identical outputs");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: acceptance <1-8>\n";
        return 2;
    }
    const int n = std::atoi(argv[1]);
    Outcome o;
    try {
        switch (n) {
            case 1: differentiation(o); break;
            case 2: structure(o); break;
            case 3: pendulum_generator(o); break;
            case 4: couette_generator(o); break;
            case 5: desk_training(o); break;
            case 6: trends(o); break;
            case 7: trivial_detector(o); break;
            case 8: determinism(o); break;
            default: std::cerr << "unknown criterion " << n << "\n"; return 2;
        }
    } catch (const std::exception& e) {
        o.require(false, std::string("exception: ") + e.what());
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.detail.str() << std::endl;
    return o.pass ? 0 : 1;
}
