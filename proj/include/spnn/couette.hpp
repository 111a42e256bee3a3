#pragma once

// Startup Couette flow of an Oldroyd-B fluid, micro-macro (CONNFFESSIT
// style). Every grid node carries an ensemble of Hookean dumbbells evolved by
//   dq_x = (dv/dy q_y - q_x / (2 We)) dt + dV_t / sqrt(We)
//   dq_y = -q_y / (2 We) dt + dW_t / sqrt(We)
// and the polymer stress tau_xy = (eps / We) mean(q_x q_y) drives
//   Re dv/dt = (1 - eps) d2v/dy2 + dtau/dy,    y in [0, 1]
//   de/dt    = (1 - eps) (dv/dy)^2 + tau dv/dy
// with v(0) = V (lid) and v(1) = 0 (wall).
//
// Grid: Nx + 1 nodes y_j = j / Nx. Nodes 0 .. Nx-1 are recorded; the wall
// node j = Nx only closes the stencil.

#include "spnn/dataset.hpp"

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace spnn::couette {

inline constexpr Eigen::Index kDim = 5;  // (<q_x>, <q_y>, v, e, tau)

struct Params {
    double V = 1.0;
    double Re = 0.1;
    double We = 1.0;
    double eps = 0.9;
    int Nx = 100;
    int K = 10000;
    int snapshots = 150;
    double dt = 0.0067;     // snapshot spacing
    int sde_substeps = 1;   // Euler-Maruyama steps per snapshot interval
    double cfl_safety = 0.9;

    void validate() const;
    double dy() const { return 1.0 / Nx; }
    // Largest stable explicit momentum step, Re dy^2 / (2 (1 - eps)).
    double cfl_limit() const;
};

class CflError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Ensemble {
    // One column per node, K rows.
    Matrix qx;
    Matrix qy;
};

// Counter-based stream for (seed, node, step).
std::mt19937_64 node_stream(std::uint64_t seed, std::uint64_t node, std::uint64_t step);

// Euler-Maruyama update of the dumbbells of one node.
void sde_step(Eigen::Ref<Vector> qx, Eigen::Ref<Vector> qy, double shear, double We, double dt,
              std::mt19937_64& rng);

// Noise-free variant (drift only).
void sde_drift(Eigen::Ref<Vector> qx, Eigen::Ref<Vector> qy, double shear, double We, double dt);

double polymer_stress(const Eigen::Ref<const Vector>& qx, const Eigen::Ref<const Vector>& qy,
                      double eps, double We);

struct Field {
    Vector v;    // Nx + 1
    Vector e;    // Nx + 1
};

// Explicit finite-difference momentum/energy update. The constructor rejects
// a step above the CFL limit.
class MacroSolver {
public:
    MacroSolver(const Params& params, double dt);

    // Advances one step with the stress profile held fixed.
    void step(Field& field, const Vector& tau) const;
    Vector shear(const Vector& v) const;
    void apply_boundary(Field& field) const;
    double dt() const { return dt_; }

private:
    Params p_;
    double dt_;
};

Field startup_field(const Params& p);

struct Generated {
    data::Dataset dataset;
    Field final_field;
    Ensemble final_ensemble;
    Vector wall_velocity;  // v at y = H at every snapshot
};

Generated generate(const Params& params, std::uint64_t seed, unsigned jobs = 1);

Params params_from_manifest(const std::map<std::string, std::string>& manifest);

}  // namespace spnn::couette
