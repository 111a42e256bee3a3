#pragma once

// Double thermoelastic pendulum: two masses joined by thermoelastic springs
// (origin - mass 1 - mass 2), with heat conduction between the springs.
//
// State layout (R^10): q1 (0,1), q2 (2,3), p1 (4,5), p2 (6,7), s1 (8), s2 (9).
//
// Spring internal energy, with d = lambda - lambda0:
//   e(lambda, s) = k d^2 / 2 + C theta_ref (exp((s - beta d) / C) - 1)
// so the temperature theta = de/ds = theta_ref exp((s - beta d) / C) is
// positive everywhere and d2e/(dlambda ds) = -beta theta / C couples stretch
// and temperature. The heat flux from spring 1 to spring 2 is
//   Q = kappa (1/theta2 - 1/theta1),   s1' = -Q/theta1,  s2' = Q/theta2,
// so theta1 s1' + theta2 s2' = 0 and s1' + s2' = kappa (1/theta2 - 1/theta1)^2.

#include "spnn/dataset.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace spnn::pendulum {

inline constexpr Eigen::Index kDim = 10;

template <typename Scalar>
using StateT = Eigen::Matrix<Scalar, kDim, 1>;
using State = StateT<double>;

struct Params {
    double m1 = 1.0;
    double m2 = 2.0;
    double lam0_1 = 2.0;
    double lam0_2 = 1.0;
    double C1 = 0.02;
    double C2 = 0.2;
    double kappa = 300.0;
    double k1 = 1.0;
    double k2 = 1.0;
    double theta_ref = 100.0;
    double beta = 1e-3;

    void validate() const;
};

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> spring_lengths(const Eigen::Matrix<Scalar, 2, 1>& q1,
                                           const Eigen::Matrix<Scalar, 2, 1>& q2) {
    using std::sqrt;
    return {sqrt(q1.squaredNorm()), sqrt((q2 - q1).squaredNorm())};
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> spring_lengths(const StateT<Scalar>& z) {
    return spring_lengths<Scalar>(z.template segment<2>(0), z.template segment<2>(2));
}

struct Spring {
    double k, lam0, C;
};

inline Spring spring(const Params& p, int i) {
    return i == 0 ? Spring{p.k1, p.lam0_1, p.C1} : Spring{p.k2, p.lam0_2, p.C2};
}

template <typename Scalar>
Scalar internal_energy(const Spring& sp, const Params& p, Scalar lam, Scalar s) {
    using std::exp;
    const Scalar d = lam - Scalar(sp.lam0);
    return Scalar(0.5 * sp.k) * d * d +
           Scalar(sp.C * p.theta_ref) * (exp((s - Scalar(p.beta) * d) / Scalar(sp.C)) - Scalar(1));
}

template <typename Scalar>
Scalar temperature(const Spring& sp, const Params& p, Scalar lam, Scalar s) {
    using std::exp;
    const Scalar d = lam - Scalar(sp.lam0);
    return Scalar(p.theta_ref) * exp((s - Scalar(p.beta) * d) / Scalar(sp.C));
}

// de/dlambda at fixed entropy.
template <typename Scalar>
Scalar spring_force(const Spring& sp, const Params& p, Scalar lam, Scalar s) {
    return Scalar(sp.k) * (lam - Scalar(sp.lam0)) -
           Scalar(p.beta) * temperature<Scalar>(sp, p, lam, s);
}

template <typename Scalar>
struct EnergyParts {
    Scalar K1, K2, e1, e2, total;
};

template <typename Scalar>
EnergyParts<Scalar> energies(const StateT<Scalar>& z, const Params& p) {
    const auto lam = spring_lengths<Scalar>(z);
    EnergyParts<Scalar> out;
    out.K1 = z.template segment<2>(4).squaredNorm() / Scalar(2 * p.m1);
    out.K2 = z.template segment<2>(6).squaredNorm() / Scalar(2 * p.m2);
    out.e1 = internal_energy<Scalar>(spring(p, 0), p, lam(0), z(8));
    out.e2 = internal_energy<Scalar>(spring(p, 1), p, lam(1), z(9));
    out.total = out.K1 + out.K2 + out.e1 + out.e2;
    using std::isfinite;
    if (!isfinite(static_cast<double>(out.total))) throw DomainError("pendulum energy is not finite");
    return out;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> temperatures(const StateT<Scalar>& z, const Params& p) {
    const auto lam = spring_lengths<Scalar>(z);
    return {temperature<Scalar>(spring(p, 0), p, lam(0), z(8)),
            temperature<Scalar>(spring(p, 1), p, lam(1), z(9))};
}

// Time derivative of the state. Throws DomainError on spring collapse
// (zero length) or a non-positive temperature.
template <typename Scalar>
StateT<Scalar> rhs(const StateT<Scalar>& z, const Params& p) {
    const Eigen::Matrix<Scalar, 2, 1> q1 = z.template segment<2>(0);
    const Eigen::Matrix<Scalar, 2, 1> q2 = z.template segment<2>(2);
    const auto lam = spring_lengths<Scalar>(q1, q2);
    if (!(lam(0) > Scalar(0)) || !(lam(1) > Scalar(0))) throw DomainError("spring collapse");
    const Spring s1 = spring(p, 0), s2 = spring(p, 1);
    const Scalar th1 = temperature<Scalar>(s1, p, lam(0), z(8));
    const Scalar th2 = temperature<Scalar>(s2, p, lam(1), z(9));
    if (!(th1 > Scalar(0)) || !(th2 > Scalar(0))) throw DomainError("non-positive temperature");

    const Eigen::Matrix<Scalar, 2, 1> u1 = q1 / lam(0);
    const Eigen::Matrix<Scalar, 2, 1> u2 = (q2 - q1) / lam(1);
    const Scalar f1 = spring_force<Scalar>(s1, p, lam(0), z(8));
    const Scalar f2 = spring_force<Scalar>(s2, p, lam(1), z(9));

    StateT<Scalar> dz;
    dz.template segment<2>(0) = z.template segment<2>(4) / Scalar(p.m1);
    dz.template segment<2>(2) = z.template segment<2>(6) / Scalar(p.m2);
    dz.template segment<2>(4) = -f1 * u1 + f2 * u2;
    dz.template segment<2>(6) = -f2 * u2;
    const Scalar flux = Scalar(p.kappa) * (Scalar(1) / th2 - Scalar(1) / th1);
    dz(8) = -flux / th1;
    dz(9) = flux / th2;
    return dz;
}

template <typename Scalar>
StateT<Scalar> rk4_step(const StateT<Scalar>& z, const Params& p, Scalar h) {
    const StateT<Scalar> k1 = rhs<Scalar>(z, p);
    const StateT<Scalar> k2 = rhs<Scalar>(z + (h / 2) * k1, p);
    const StateT<Scalar> k3 = rhs<Scalar>(z + (h / 2) * k2, p);
    const StateT<Scalar> k4 = rhs<Scalar>(z + h * k3, p);
    return z + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
}

struct GenerateSpec {
    int n_traj = 50;
    double horizon = 60.0;   // T; snapshots = horizon / dt_out
    double dt_out = 0.3;
    int substeps = 20;
    double preroll = 20.0;
    double perturbation = 0.05;  // uniform relative, on q1 and p1
    std::uint64_t seed = 0;
    unsigned jobs = 1;

    Eigen::Index snapshots() const;
};

State mean_initial_state();

// Initial state of trajectory `index` on rejection attempt `attempt`,
// before the pre-roll.
State perturbed_initial_state(const GenerateSpec& spec, int index, int attempt);

struct Generated {
    data::Dataset dataset;
    int rejections = 0;
};

Generated generate(const Params& params, const GenerateSpec& spec);

// Analytic total energy of every snapshot column of a dim x n block.
Vector total_energy(const Params& p, const Matrix& states);

Params params_from_manifest(const std::map<std::string, std::string>& manifest);

}  // namespace spnn::pendulum
