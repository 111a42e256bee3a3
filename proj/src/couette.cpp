#include "spnn/couette.hpp"

#include "spnn/io.hpp"
#include "spnn/parallel.hpp"

#include <cmath>

namespace spnn::couette {

void Params::validate() const {
    if (!(Re > 0.0) || !(We > 0.0) || !(dt > 0.0)) throw std::invalid_argument("Re, We and dt must be positive");
    if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in [0, 1)");
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    if (Nx < 3) throw std::invalid_argument("Nx must be >= 3");
    if (snapshots < 2) throw std::invalid_argument("snapshots must be >= 2");
    if (sde_substeps < 1) throw std::invalid_argument("sde_substeps must be >= 1");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw std::invalid_argument("cfl_safety must lie in (0, 1]");
}

double Params::cfl_limit() const { return Re * dy() * dy() / (2.0 * (1.0 - eps)); }

std::mt19937_64 node_stream(std::uint64_t seed, std::uint64_t node, std::uint64_t step) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(node), static_cast<std::uint32_t>(step),
                      static_cast<std::uint32_t>(step >> 32)};
    return std::mt19937_64(seq);
}

void sde_step(Eigen::Ref<Vector> qx, Eigen::Ref<Vector> qy, double shear, double We, double dt,
              std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, std::sqrt(dt / We));
    const double decay = dt / (2.0 * We);
    for (Eigen::Index k = 0; k < qx.size(); ++k) {
        const double x = qx(k), y = qy(k);
        const double dv = noise(rng);
        const double dw = noise(rng);
        qx(k) = x + (shear * y - x / (2.0 * We)) * dt + dv;
        qy(k) = y - y * decay + dw;
    }
}

void sde_drift(Eigen::Ref<Vector> qx, Eigen::Ref<Vector> qy, double shear, double We, double dt) {
    const Vector x = qx;
    qx = x + (shear * qy - x / (2.0 * We)) * dt;
    qy = qy - qy * (dt / (2.0 * We));
}

double polymer_stress(const Eigen::Ref<const Vector>& qx, const Eigen::Ref<const Vector>& qy,
                      double eps, double We) {
    if (qx.size() < 1 || qx.size() != qy.size()) throw std::invalid_argument("polymer_stress: empty ensemble");
    return (eps / We) * qx.cwiseProduct(qy).mean();
}

MacroSolver::MacroSolver(const Params& params, double dt) : p_(params), dt_(dt) {
    p_.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("macro step must be positive");
    if (p_.eps < 1.0 && dt > p_.cfl_limit()) {
        throw CflError("macro step " + io::format_double(dt) + " exceeds CFL limit Re dy^2/(2(1-eps)) = " +
                       io::format_double(p_.cfl_limit()));
    }
}

void MacroSolver::apply_boundary(Field& f) const {
    f.v(0) = p_.V;
    f.v(f.v.size() - 1) = 0.0;
}

Vector MacroSolver::shear(const Vector& v) const {
    const Eigen::Index n = v.size();
    const double h = p_.dy();
    Vector s(n);
    s(0) = (v(1) - v(0)) / h;
    s(n - 1) = (v(n - 1) - v(n - 2)) / h;
    for (Eigen::Index j = 1; j + 1 < n; ++j) s(j) = (v(j + 1) - v(j - 1)) / (2.0 * h);
    return s;
}

void MacroSolver::step(Field& f, const Vector& tau) const {
    const Eigen::Index n = f.v.size();
    if (tau.size() != n) throw std::invalid_argument("macro_step: stress profile size mismatch");
    const double h = p_.dy();
    const Vector s = shear(f.v);
    Vector v_next = f.v;
    for (Eigen::Index j = 1; j + 1 < n; ++j) {
        const double lap = (f.v(j + 1) - 2.0 * f.v(j) + f.v(j - 1)) / (h * h);
        const double dtau = (tau(j + 1) - tau(j - 1)) / (2.0 * h);
        v_next(j) = f.v(j) + dt_ / p_.Re * ((1.0 - p_.eps) * lap + dtau);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        f.e(j) += dt_ * ((1.0 - p_.eps) * s(j) * s(j) + tau(j) * s(j));
    }
    f.v = v_next;
    apply_boundary(f);
}

Field startup_field(const Params& p) {
    Field f{Vector::Zero(p.Nx + 1), Vector::Zero(p.Nx + 1)};
    f.v(0) = p.V;
    return f;
}

Generated generate(const Params& params, std::uint64_t seed, unsigned jobs) {
    params.validate();
    const Eigen::Index nodes = params.Nx + 1;
    const double dt_sde = params.dt / params.sde_substeps;
    const auto macro_steps = static_cast<int>(std::ceil(dt_sde / (params.cfl_safety * params.cfl_limit())));
    const MacroSolver solver(params, dt_sde / macro_steps);

    Generated g;
    Ensemble& ens = g.final_ensemble;
    ens.qx.resize(params.K, nodes);
    ens.qy.resize(params.K, nodes);
    // Equilibrium start: unit-variance Gaussian dumbbells, stream step 0.
    parallel_for(static_cast<std::size_t>(nodes), jobs, [&](std::size_t j) {
        auto rng = node_stream(seed, j, 0);
        std::normal_distribution<double> nd(0.0, 1.0);
        for (Eigen::Index k = 0; k < params.K; ++k) {
            ens.qx(k, static_cast<Eigen::Index>(j)) = nd(rng);
            ens.qy(k, static_cast<Eigen::Index>(j)) = nd(rng);
        }
    });

    Field field = startup_field(params);
    Vector tau(nodes);
    auto update_tau = [&] {
        for (Eigen::Index j = 0; j < nodes; ++j) tau(j) = polymer_stress(ens.qx.col(j), ens.qy.col(j), params.eps, params.We);
    };
    update_tau();

    data::Dataset& ds = g.dataset;
    ds = data::Dataset(data::System::Couette, params.dt, params.Nx, params.snapshots, kDim);
    g.wall_velocity.resize(params.snapshots);
    auto record = [&](Eigen::Index n) {
        for (Eigen::Index j = 0; j < params.Nx; ++j) {
            auto traj = ds.trajectory(j);
            traj(0, n) = ens.qx.col(j).mean();
            traj(1, n) = ens.qy.col(j).mean();
            traj(2, n) = field.v(j);
            traj(3, n) = field.e(j);
            traj(4, n) = tau(j);
        }
        g.wall_velocity(n) = field.v(nodes - 1);
    };
    record(0);

    std::uint64_t sde_counter = 0;
    for (Eigen::Index n = 1; n < params.snapshots; ++n) {
        for (int sub = 0; sub < params.sde_substeps; ++sub) {
            for (int k = 0; k < macro_steps; ++k) solver.step(field, tau);
            const Vector s = solver.shear(field.v);
            ++sde_counter;
            parallel_for(static_cast<std::size_t>(nodes), jobs, [&](std::size_t j) {
                auto rng = node_stream(seed, j, sde_counter);
                const auto col = static_cast<Eigen::Index>(j);
                sde_step(ens.qx.col(col), ens.qy.col(col), s(col), params.We, dt_sde, rng);
            });
            update_tau();
        }
        record(n);
    }
    g.final_field = field;

    auto& mf = ds.manifest;
    auto put = [&](const std::string& k, double v) { mf[k] = io::format_double(v); };
    put("couette.V", params.V);
    put("couette.Re", params.Re);
    put("couette.We", params.We);
    put("couette.eps", params.eps);
    put("couette.dt", params.dt);
    put("couette.macro_dt", solver.dt());
    mf["couette.Nx"] = std::to_string(params.Nx);
    mf["couette.K"] = std::to_string(params.K);
    mf["couette.snapshots"] = std::to_string(params.snapshots);
    mf["couette.sde_substeps"] = std::to_string(params.sde_substeps);
    mf["gen.seed"] = std::to_string(seed);
    mf["law.momentum"] = "Re dv/dt = (1-eps) v_yy + tau_y";
    mf["law.internal_energy"] = "de/dt = (1-eps) v_y^2 + tau v_y";
    mf["law.state_q"] = "ensemble mean";
    return g;
}

Params params_from_manifest(const std::map<std::string, std::string>& mf) {
    Params p;
    auto getd = [&](const std::string& k, double& v) {
        if (auto it = mf.find(k); it != mf.end()) v = io::parse_double(it->second);
    };
    auto geti = [&](const std::string& k, int& v) {
        if (auto it = mf.find(k); it != mf.end()) v = static_cast<int>(io::parse_int(it->second));
    };
    getd("couette.V", p.V);
    getd("couette.Re", p.Re);
    getd("couette.We", p.We);
    getd("couette.eps", p.eps);
    getd("couette.dt", p.dt);
    geti("couette.Nx", p.Nx);
    geti("couette.K", p.K);
    geti("couette.snapshots", p.snapshots);
    geti("couette.sde_substeps", p.sde_substeps);
    return p;
}

}  // namespace spnn::couette
