#pragma once

// Bracket structure learned by the network: the raw head is split into the
// generator matrices l, m and the energy scalars; L = l - l^T is skew and
// M = m m^T is positive semi-definite. One forward-Euler step advances
// z under either
//   single generator:  z' = z + dt (L + M) dF/dz
//   GENERIC:           z' = z + dt (L dH/dz + M dS/dz).
//
// Graph-level functions work on batches: every column is one state, and the
// per-state D x D matrices are packed row-major into columns of height D*D.

#include "spnn/autodiff.hpp"

#include <string>
#include <vector>

namespace spnn::bracket {

enum class Formalism { SingleGenerator, Generic };

std::string formalism_name(Formalism f);
Formalism parse_formalism(const std::string& s);

// 2 D^2 + 1 (single generator) or 2 D^2 + 2 (GENERIC).
Eigen::Index head_width(Eigen::Index dim, Formalism f);
inline int energy_count(Formalism f) { return f == Formalism::Generic ? 2 : 1; }

struct BracketHead {
    Eigen::Index dim = 0;
    ad::Var l;                      // D*D x N
    ad::Var m;                      // D*D x N
    std::vector<ad::Var> energies;  // {F} or {H, S}, each 1 x N
};

// raw: head_width x N. Rows [0, D^2) fill l, [D^2, 2D^2) fill m, then the
// energies.
BracketHead split_head(ad::Var raw, Eigen::Index dim, Formalism f);

struct Operators {
    Eigen::Index dim = 0;
    ad::Var L;  // D*D x N, skew per column
    ad::Var M;  // D*D x N, PSD per column
};

Operators assemble(const BracketHead& head);

struct StepInput {
    ad::Var z;              // D x N
    double dt = 0.0;
    ad::Var grad_primary;   // dF/dz or dH/dz, D x N
    ad::Var grad_entropy;   // dS/dz under GENERIC, unset otherwise
};

// Forward-Euler update. Throws NonFiniteError with operator and gradient
// norms if the result is not finite.
ad::Var step(const StepInput& in, const Operators& ops, Formalism f);

struct Residuals {
    ad::Var r_L;  // L dS/dz
    ad::Var r_M;  // M dH/dz
};

// GENERIC only; throws std::logic_error for the single generator.
Residuals degeneracy_residuals(const Operators& ops, ad::Var grad_h, ad::Var grad_s,
                               Formalism f);

// |r_L|^2 + |r_M|^2 summed over the batch.
ad::Var degeneracy_loss(const Residuals& r);

// ---------------------------------------------------------------------------
// Dense single-state counterparts.

template <typename Derived>
auto skew_part(const Eigen::MatrixBase<Derived>& l) {
    return (l - l.transpose()).eval();
}

template <typename Derived>
auto gram(const Eigen::MatrixBase<Derived>& m) {
    return (m * m.transpose()).eval();
}

// Unpacks column `col` of a packed D*D x N block into a D x D matrix.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> unpack(const Matrix& packed,
                                                             Eigen::Index col, Eigen::Index dim) {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMajor>(packed.col(col).data(), dim, dim).template cast<Scalar>();
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> euler_generic(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& z,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& L,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& M,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grad_h,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grad_s, Scalar dt) {
    return z + dt * (L * grad_h + M * grad_s);
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> euler_single(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& z,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& L,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& M,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grad_f, Scalar dt) {
    return z + dt * ((L + M) * grad_f);
}

}  // namespace spnn::bracket
