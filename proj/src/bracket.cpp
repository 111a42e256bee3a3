#include "spnn/bracket.hpp"

#include <sstream>
#include <stdexcept>

namespace spnn::bracket {

std::string formalism_name(Formalism f) {
    return f == Formalism::Generic ? "generic" : "single";
}

Formalism parse_formalism(const std::string& s) {
    if (s == "generic" || s == "GENERIC") return Formalism::Generic;
    if (s == "single" || s == "single-generator") return Formalism::SingleGenerator;
    throw std::invalid_argument("unknown formalism '" + s + "' (expected generic|single)");
}

Eigen::Index head_width(Eigen::Index dim, Formalism f) {
    return 2 * dim * dim + energy_count(f);
}

BracketHead split_head(ad::Var raw, Eigen::Index dim, Formalism f) {
    const Eigen::Index want = head_width(dim, f);
    if (raw.shape().rank == 0 || raw.shape().rows != want) {
        std::ostringstream os;
        os << "split_head: expected " << want << " rows ([l: " << dim * dim << "][m: " << dim * dim
           << "][" << (f == Formalism::Generic ? "H, S" : "F") << "]) for D=" << dim
           << ", got " << raw.shape().str();
        throw ShapeError(os.str());
    }
    const Eigen::Index d2 = dim * dim;
    BracketHead h;
    h.dim = dim;
    h.l = ad::slice_rows(raw, 0, d2);
    h.m = ad::slice_rows(raw, d2, d2);
    for (int k = 0; k < energy_count(f); ++k) h.energies.push_back(ad::slice_rows(raw, 2 * d2 + k, 1));
    return h;
}

Operators assemble(const BracketHead& head) {
    const Eigen::Index d = head.dim;
    Operators ops;
    ops.dim = d;
    ops.L = head.l - ad::batched_transpose(head.l, d, d);
    ops.M = ad::batched_matmul(head.m, d, d, head.m, d, d, false, true);
    return ops;
}

namespace {
ad::Var apply_op(ad::Var op, Eigen::Index d, ad::Var g) {
    return ad::batched_matmul(op, d, d, g, d, 1);
}

void check_vec(ad::Var v, Eigen::Index d, const char* what) {
    if (!v.valid() || v.shape().rank == 0 || v.shape().rows != d) {
        throw ShapeError(std::string("step: ") + what + " must have " + std::to_string(d) + " rows");
    }
}
}  // namespace

ad::Var step(const StepInput& in, const Operators& ops, Formalism f) {
    const Eigen::Index d = ops.dim;
    check_vec(in.z, d, "state");
    check_vec(in.grad_primary, d, "energy gradient");
    ad::Var rate;
    if (f == Formalism::Generic) {
        check_vec(in.grad_entropy, d, "entropy gradient");
        rate = apply_op(ops.L, d, in.grad_primary) + apply_op(ops.M, d, in.grad_entropy);
    } else {
        rate = apply_op(ops.L + ops.M, d, in.grad_primary);
    }
    ad::Var next = in.z + in.dt * rate;
    if (!next.value().allFinite()) {
        std::ostringstream os;
        os << "step: non-finite state (|L|=" << ops.L.value().norm() << ", |M|=" << ops.M.value().norm()
           << ", |grad|=" << in.grad_primary.value().norm();
        if (in.grad_entropy.valid()) os << ", |grad S|=" << in.grad_entropy.value().norm();
        os << ")";
        throw NonFiniteError(next.id().index, os.str());
    }
    return next;
}

Residuals degeneracy_residuals(const Operators& ops, ad::Var grad_h, ad::Var grad_s, Formalism f) {
    if (f != Formalism::Generic) {
        throw std::logic_error("degeneracy residuals need separate H and S (GENERIC only)");
    }
    return {apply_op(ops.L, ops.dim, grad_s), apply_op(ops.M, ops.dim, grad_h)};
}

ad::Var degeneracy_loss(const Residuals& r) {
    return ad::sum(ad::square(r.r_L)) + ad::sum(ad::square(r.r_M));
}

}  // namespace spnn::bracket
