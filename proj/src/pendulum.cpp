#include "spnn/pendulum.hpp"

#include "spnn/io.hpp"
#include "spnn/parallel.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace spnn::pendulum {

void Params::validate() const {
    for (double v : {m1, m2, lam0_1, lam0_2, C1, C2, kappa, k1, k2, theta_ref}) {
        if (!(v > 0.0)) throw std::invalid_argument("pendulum parameters must be positive");
    }
    if (!(beta >= 0.0)) throw std::invalid_argument("pendulum beta must be >= 0");
}

Eigen::Index GenerateSpec::snapshots() const {
    const double ratio = horizon / dt_out;
    const double rounded = std::round(ratio);
    if (!(dt_out > 0.0) || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio) || rounded < 2) {
        throw std::invalid_argument("horizon / dt_out must be an integer >= 2");
    }
    return static_cast<Eigen::Index>(rounded);
}

State mean_initial_state() {
    State z;
    z << 4.5, 4.5, 2.0, 4.5, -0.5, 1.5, 1.4, -0.2, 0.0, 0.0;
    return z;
}

State perturbed_initial_state(const GenerateSpec& spec, int index, int attempt) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(attempt)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(-spec.perturbation, spec.perturbation);
    State z = mean_initial_state();
    for (int i : {0, 1, 4, 5}) z(i) *= 1.0 + u(rng);
    return z;
}

namespace {

// Integrates one trajectory; returns false on a domain failure.
bool integrate(const Params& p, const GenerateSpec& spec, State z, Eigen::Ref<Matrix> out) {
    const double h = spec.dt_out / spec.substeps;
    const auto n_pre = static_cast<long>(std::ceil(spec.preroll / h - 1e-9));
    const double h_pre = n_pre > 0 ? spec.preroll / static_cast<double>(n_pre) : 0.0;
    try {
        for (long i = 0; i < n_pre; ++i) z = rk4_step<double>(z, p, h_pre);
        out.col(0) = z;
        for (Eigen::Index n = 1; n < out.cols(); ++n) {
            for (int k = 0; k < spec.substeps; ++k) z = rk4_step<double>(z, p, h);
            if (!z.allFinite()) return false;
            out.col(n) = z;
        }
        (void)rhs<double>(z, p);
    } catch (const DomainError&) {
        return false;
    }
    return out.allFinite();
}

}  // namespace

Generated generate(const Params& params, const GenerateSpec& spec) {
    params.validate();
    if (spec.substeps < 1) throw std::invalid_argument("substeps must be >= 1");
    if (spec.n_traj < 1) throw std::invalid_argument("n_traj must be >= 1");
    const Eigen::Index n_time = spec.snapshots();

    Generated g;
    g.dataset = data::Dataset(data::System::Pendulum, spec.dt_out, spec.n_traj, n_time, kDim);
    std::vector<int> rejections(static_cast<std::size_t>(spec.n_traj), 0);
    constexpr int kMaxAttempts = 1000;
    parallel_for(static_cast<std::size_t>(spec.n_traj), spec.jobs, [&](std::size_t i) {
        auto block = g.dataset.trajectory(static_cast<Eigen::Index>(i));
        for (int attempt = 0;; ++attempt) {
            if (attempt == kMaxAttempts) throw std::runtime_error("pendulum: too many rejected trajectories");
            if (integrate(params, spec, perturbed_initial_state(spec, static_cast<int>(i), attempt), block)) break;
            ++rejections[i];
        }
    });
    for (int r : rejections) g.rejections += r;

    auto& mf = g.dataset.manifest;
    auto put = [&](const std::string& k, double v) { mf[k] = io::format_double(v); };
    put("pendulum.m1", params.m1);
    put("pendulum.m2", params.m2);
    put("pendulum.lam0_1", params.lam0_1);
    put("pendulum.lam0_2", params.lam0_2);
    put("pendulum.C1", params.C1);
    put("pendulum.C2", params.C2);
    put("pendulum.kappa", params.kappa);
    put("pendulum.k1", params.k1);
    put("pendulum.k2", params.k2);
    put("pendulum.theta_ref", params.theta_ref);
    put("pendulum.beta", params.beta);
    put("gen.horizon", spec.horizon);
    put("gen.dt_out", spec.dt_out);
    put("gen.preroll", spec.preroll);
    put("gen.perturbation", spec.perturbation);
    mf["gen.substeps"] = std::to_string(spec.substeps);
    mf["gen.n_traj"] = std::to_string(spec.n_traj);
    mf["gen.seed"] = std::to_string(spec.seed);
    mf["gen.rejections"] = std::to_string(g.rejections);
    mf["gen.integrator"] = "rk4";
    mf["gen.perturbation_law"] = "uniform";
    mf["gen.initial_entropy"] = "0";
    mf["law.internal_energy"] = "k/2 (lam-lam0)^2 + C theta_ref (exp((s - beta (lam-lam0))/C) - 1)";
    mf["law.heat_flux"] = "kappa (1/theta2 - 1/theta1)";
    return g;
}

Vector total_energy(const Params& p, const Matrix& states) {
    Vector e(states.cols());
    for (Eigen::Index n = 0; n < states.cols(); ++n) {
        const State z = states.col(n);
        e(n) = energies<double>(z, p).total;
    }
    return e;
}

Params params_from_manifest(const std::map<std::string, std::string>& mf) {
    Params p;
    auto get = [&](const std::string& k, double& v) {
        if (auto it = mf.find(k); it != mf.end()) v = io::parse_double(it->second);
    };
    get("pendulum.m1", p.m1);
    get("pendulum.m2", p.m2);
    get("pendulum.lam0_1", p.lam0_1);
    get("pendulum.lam0_2", p.lam0_2);
    get("pendulum.C1", p.C1);
    get("pendulum.C2", p.C2);
    get("pendulum.kappa", p.kappa);
    get("pendulum.k1", p.k1);
    get("pendulum.k2", p.k2);
    get("pendulum.theta_ref", p.theta_ref);
    get("pendulum.beta", p.beta);
    return p;
}

}  // namespace spnn::pendulum
