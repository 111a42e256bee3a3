#include "spnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace spnn::ad {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMajor>;
using RowMap = Eigen::Map<RowMajor>;

double softplus_scalar(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

[[noreturn]] void shape_error(Op op, std::string_view detail) {
    std::ostringstream os;
    os << "autodiff: primitive '" << op_name(op) << "': " << detail;
    throw ShapeError(os.str());
}

// (rows, cols) of op(X) for a batched operand stored with per-column dims r x c.
std::pair<Eigen::Index, Eigen::Index> op_dims(Eigen::Index r, Eigen::Index c, bool t) {
    return t ? std::pair{c, r} : std::pair{r, c};
}

}  // namespace

std::string Shape::str() const {
    std::ostringstream os;
    switch (rank) {
        case 0: os << "[]"; break;
        case 1: os << "[" << rows << "]"; break;
        default: os << "[" << rows << "x" << cols << "]"; break;
    }
    return os.str();
}

std::string_view op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Add: return "add";
        case Op::Sub: return "subtract";
        case Op::Mul: return "multiply";
        case Op::Scale: return "scale";
        case Op::ScalarMul: return "scalar_times";
        case Op::MatVec: return "matvec";
        case Op::MatMul: return "matmul";
        case Op::Outer: return "outer";
        case Op::Transpose: return "transpose";
        case Op::Sum: return "sum";
        case Op::Square: return "square";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Reciprocal: return "reciprocal";
        case Op::Softplus: return "softplus";
        case Op::Sigmoid: return "sigmoid";
        case Op::SliceRows: return "slice_rows";
        case Op::PadRows: return "pad_rows";
        case Op::BatchedMatMul: return "batched_matmul";
        case Op::BatchedTranspose: return "batched_transpose";
    }
    return "unknown";
}

const Matrix& Var::value() const { return graph_->node(id_).value; }
const Shape& Var::shape() const { return graph_->node(id_).shape; }

double Var::scalar() const {
    const auto& n = graph_->node(id_);
    if (n.shape.rank != 0) {
        throw ShapeError("autodiff: scalar() on node of shape " + n.shape.str());
    }
    return n.value(0, 0);
}

// ---------------------------------------------------------------------------
// Leaves

Var Graph::add_leaf(Matrix value, Shape shape, LeafKind kind) {
    if (value.rows() != shape.rows || value.cols() != shape.cols) {
        throw ShapeError("autodiff: leaf value does not match shape " + shape.str());
    }
    Node n;
    n.id = NodeId{nodes_.size()};
    n.op = Op::Leaf;
    n.leaf = kind;
    n.shape = shape;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    const NodeId id = nodes_.back().id;
    if (kind == LeafKind::Input) inputs_.push_back(id);
    if (kind == LeafKind::Parameter) parameters_.push_back(id);
    return {this, id};
}

Var Graph::constant(Matrix value, Shape shape) {
    return add_leaf(std::move(value), shape, LeafKind::Constant);
}

Var Graph::constant_scalar(double v) {
    return add_leaf(Matrix::Constant(1, 1, v), Shape::scalar(), LeafKind::Constant);
}

Var Graph::constant_vector(const Vector& v) {
    return add_leaf(Matrix(v), Shape::vector(v.size()), LeafKind::Constant);
}

Var Graph::constant_matrix(const Matrix& m) {
    return add_leaf(m, Shape::matrix(m.rows(), m.cols()), LeafKind::Constant);
}

Var Graph::zeros(Shape shape) {
    return add_leaf(Matrix::Zero(shape.rows, shape.cols), shape, LeafKind::Constant);
}

Var Graph::input(const Matrix& m) {
    return add_leaf(m, Shape::matrix(m.rows(), m.cols()), LeafKind::Input);
}

Var Graph::input(const Vector& v) {
    return add_leaf(Matrix(v), Shape::vector(v.size()), LeafKind::Input);
}

Var Graph::parameter(const Matrix& m) {
    return add_leaf(m, Shape::matrix(m.rows(), m.cols()), LeafKind::Parameter);
}

Var Graph::parameter(const Vector& v) {
    return add_leaf(Matrix(v), Shape::vector(v.size()), LeafKind::Parameter);
}

void Graph::set_leaf_value(NodeId id, const Matrix& value) {
    Node& n = nodes_.at(id.index);
    if (n.op != Op::Leaf) throw std::invalid_argument("autodiff: set_leaf_value on derived node");
    if (value.rows() != n.shape.rows || value.cols() != n.shape.cols) {
        throw ShapeError("autodiff: set_leaf_value shape mismatch for " + n.shape.str());
    }
    n.value = value;
}

// ---------------------------------------------------------------------------
// Shapes

Shape Graph::infer_shape(Op op, std::span<const NodeId> parents,
                         const std::array<Eigen::Index, 6>& at) const {
    auto sh = [&](std::size_t i) -> const Shape& { return nodes_.at(parents[i].index).shape; };
    const std::size_t want = [&] {
        switch (op) {
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::ScalarMul:
            case Op::MatVec:
            case Op::MatMul:
            case Op::Outer:
            case Op::BatchedMatMul: return std::size_t{2};
            case Op::Leaf: return std::size_t{0};
            default: return std::size_t{1};
        }
    }();
    if (parents.size() != want) {
        shape_error(op, "expected " + std::to_string(want) + " operands, got " +
                            std::to_string(parents.size()));
    }
    for (auto p : parents) {
        if (p.index >= nodes_.size()) shape_error(op, "operand handle does not exist");
    }

    switch (op) {
        case Op::Leaf: shape_error(op, "leaves are created with constant/input/parameter");
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
            if (!(sh(0) == sh(1))) {
                shape_error(op, "shapes " + sh(0).str() + " and " + sh(1).str() + " differ");
            }
            return sh(0);
        case Op::Scale:
        case Op::Square:
        case Op::Exp:
        case Op::Log:
        case Op::Reciprocal:
        case Op::Softplus:
        case Op::Sigmoid: return sh(0);
        case Op::ScalarMul:
            if (sh(0).rank != 0) shape_error(op, "first operand must be [] but is " + sh(0).str());
            return sh(1);
        case Op::MatVec:
            if (sh(0).rank != 2 || sh(1).rank != 1 || sh(0).cols != sh(1).rows) {
                shape_error(op, "cannot apply " + sh(0).str() + " to " + sh(1).str());
            }
            return Shape::vector(sh(0).rows);
        case Op::MatMul:
            if (sh(0).rank != 2 || sh(1).rank != 2 || sh(0).cols != sh(1).rows) {
                shape_error(op, "cannot multiply " + sh(0).str() + " by " + sh(1).str());
            }
            return Shape::matrix(sh(0).rows, sh(1).cols);
        case Op::Outer:
            if (sh(0).rank != 1 || sh(1).rank != 1) {
                shape_error(op, "needs two vectors, got " + sh(0).str() + " and " + sh(1).str());
            }
            return Shape::matrix(sh(0).rows, sh(1).rows);
        case Op::Transpose:
            if (sh(0).rank != 2) shape_error(op, "needs a matrix, got " + sh(0).str());
            return Shape::matrix(sh(0).cols, sh(0).rows);
        case Op::Sum: return Shape::scalar();
        case Op::SliceRows: {
            const Shape& s = sh(0);
            if (s.rank == 0 || at[0] < 0 || at[1] < 1 || at[0] + at[1] > s.rows) {
                shape_error(op, "rows [" + std::to_string(at[0]) + ", " +
                                    std::to_string(at[0] + at[1]) + ") out of " + s.str());
            }
            Shape r = s;
            r.rows = at[1];
            return r;
        }
        case Op::PadRows: {
            const Shape& s = sh(0);
            if (s.rank == 0 || at[0] < 0 || at[0] + s.rows > at[1]) {
                shape_error(op, "cannot place " + s.str() + " at row " + std::to_string(at[0]) +
                                    " of " + std::to_string(at[1]));
            }
            Shape r = s;
            r.rows = at[1];
            return r;
        }
        case Op::BatchedMatMul: {
            const Shape& a = sh(0);
            const Shape& b = sh(1);
            if (a.rank == 0 || b.rank == 0 || a.rows != at[0] * at[1] || b.rows != at[2] * at[3] ||
                a.cols != b.cols) {
                shape_error(op, "operands " + a.str() + " and " + b.str() +
                                    " do not hold per-column " + std::to_string(at[0]) + "x" +
                                    std::to_string(at[1]) + " and " + std::to_string(at[2]) +
                                    "x" + std::to_string(at[3]) + " blocks");
            }
            auto [m, ka] = op_dims(at[0], at[1], at[4] != 0);
            auto [kb, n] = op_dims(at[2], at[3], at[5] != 0);
            if (ka != kb) {
                shape_error(op, "inner dimensions " + std::to_string(ka) + " and " +
                                    std::to_string(kb) + " differ");
            }
            Shape r = (a.rank == 2 || b.rank == 2) ? Shape::matrix(m * n, a.cols)
                                                    : Shape::vector(m * n);
            return r;
        }
        case Op::BatchedTranspose:
            if (sh(0).rank == 0 || sh(0).rows != at[0] * at[1]) {
                shape_error(op, sh(0).str() + " does not hold " + std::to_string(at[0]) + "x" +
                                    std::to_string(at[1]) + " blocks");
            }
            return sh(0);
    }
    shape_error(op, "unknown primitive");
}

// ---------------------------------------------------------------------------
// Forward evaluation

void Graph::evaluate(Node& n) const {
    auto val = [&](std::size_t i) -> const Matrix& { return nodes_[n.parents[i].index].value; };
    const auto& at = n.attrs;
    switch (n.op) {
        case Op::Leaf: return;
        case Op::Add: n.value = val(0) + val(1); return;
        case Op::Sub: n.value = val(0) - val(1); return;
        case Op::Mul: n.value = val(0).cwiseProduct(val(1)); return;
        case Op::Scale: n.value = n.coeff * val(0); return;
        case Op::ScalarMul: n.value = val(0)(0, 0) * val(1); return;
        case Op::MatVec: n.value.noalias() = val(0) * val(1); return;
        case Op::MatMul: {
            // Column by column, so a column's result does not depend on how
            // many other columns share the batch.
            const Matrix& a = val(0);
            const Matrix& b = val(1);
            n.value.resize(a.rows(), b.cols());
            for (Eigen::Index c = 0; c < b.cols(); ++c) n.value.col(c).noalias() = a * b.col(c);
            return;
        }
        case Op::Outer: n.value.noalias() = val(0) * val(1).transpose(); return;
        case Op::Transpose: n.value = val(0).transpose(); return;
        case Op::Sum: n.value = Matrix::Constant(1, 1, val(0).sum()); return;
        case Op::Square: n.value = val(0).array().square().matrix(); return;
        case Op::Exp: n.value = val(0).array().exp().matrix(); return;
        case Op::Log: n.value = val(0).array().log().matrix(); return;
        case Op::Reciprocal: n.value = val(0).array().inverse().matrix(); return;
        case Op::Softplus: n.value = val(0).unaryExpr(&softplus_scalar); return;
        case Op::Sigmoid: n.value = val(0).unaryExpr(&sigmoid_scalar); return;
        case Op::SliceRows: n.value = val(0).middleRows(at[0], at[1]); return;
        case Op::PadRows:
            n.value = Matrix::Zero(n.shape.rows, n.shape.cols);
            n.value.middleRows(at[0], val(0).rows()) = val(0);
            return;
        case Op::BatchedMatMul: {
            const Matrix& a = val(0);
            const Matrix& b = val(1);
            const bool ta = at[4] != 0;
            const bool tb = at[5] != 0;
            auto [m, k] = op_dims(at[0], at[1], ta);
            const Eigen::Index ncols = op_dims(at[2], at[3], tb).second;
            n.value.resize(m * ncols, a.cols());
            for (Eigen::Index col = 0; col < a.cols(); ++col) {
                ConstRowMap ablk(a.col(col).data(), at[0], at[1]);
                ConstRowMap bblk(b.col(col).data(), at[2], at[3]);
                RowMap out(n.value.col(col).data(), m, ncols);
                if (!ta && !tb) out.noalias() = ablk * bblk;
                else if (ta && !tb) out.noalias() = ablk.transpose() * bblk;
                else if (!ta && tb) out.noalias() = ablk * bblk.transpose();
                else out.noalias() = ablk.transpose() * bblk.transpose();
            }
            (void)k;
            return;
        }
        case Op::BatchedTranspose: {
            const Matrix& a = val(0);
            n.value.resize(a.rows(), a.cols());
            for (Eigen::Index col = 0; col < a.cols(); ++col) {
                ConstRowMap blk(a.col(col).data(), at[0], at[1]);
                RowMap out(n.value.col(col).data(), at[1], at[0]);
                out = blk.transpose();
            }
            return;
        }
    }
}

Var Graph::apply(Op op, std::span<const NodeId> parents, const std::array<Eigen::Index, 6>& attrs,
                 double coeff) {
    Node n;
    n.shape = infer_shape(op, parents, attrs);
    n.id = NodeId{nodes_.size()};
    n.op = op;
    n.arity = static_cast<std::uint8_t>(parents.size());
    for (std::size_t i = 0; i < parents.size(); ++i) n.parents[i] = parents[i];
    n.attrs = attrs;
    n.coeff = coeff;
    evaluate(n);
    nodes_.push_back(std::move(n));
    return {this, nodes_.back().id};
}

void Graph::reevaluate() {
    for (auto& n : nodes_) {
        if (n.op == Op::Leaf) continue;
        evaluate(n);
    }
}

// ---------------------------------------------------------------------------
// Reverse pass

std::array<Var, 2> Graph::backprop_rule(const Node& n, Var g, Var out,
                                        std::array<bool, 2> keep) {
    // Copies: emitting nodes below may reallocate nodes_.
    const std::array<NodeId, 2> par = n.parents;
    const std::array<Eigen::Index, 6> at = n.attrs;
    const double coeff = n.coeff;
    std::array<Var, 2> d{};
    auto var = [&](int i) { return Var{this, par[i]}; };

    switch (n.op) {
        case Op::Leaf: break;
        case Op::Add:
            if (keep[0]) d[0] = g;
            if (keep[1]) d[1] = g;
            break;
        case Op::Sub:
            if (keep[0]) d[0] = g;
            if (keep[1]) d[1] = -g;
            break;
        case Op::Mul:
            if (keep[0]) d[0] = cwise_product(g, var(1));
            if (keep[1]) d[1] = cwise_product(g, var(0));
            break;
        case Op::Scale: d[0] = coeff * g; break;
        case Op::ScalarMul:
            if (keep[0]) d[0] = sum(cwise_product(g, var(1)));
            if (keep[1]) d[1] = scalar_times(var(0), g);
            break;
        case Op::MatVec:
            if (keep[0]) d[0] = outer(g, var(1));
            if (keep[1]) d[1] = matvec(transpose(var(0)), g);
            break;
        case Op::MatMul:
            if (keep[0]) d[0] = matmul(g, transpose(var(1)));
            if (keep[1]) d[1] = matmul(transpose(var(0)), g);
            break;
        case Op::Outer:
            if (keep[0]) d[0] = matvec(g, var(1));
            if (keep[1]) d[1] = matvec(transpose(g), var(0));
            break;
        case Op::Transpose: d[0] = transpose(g); break;
        case Op::Sum: {
            const Shape s = node(par[0]).shape;
            Var ones = constant(Matrix::Ones(s.rows, s.cols), s);
            d[0] = scalar_times(g, ones);
            break;
        }
        case Op::Square: d[0] = cwise_product(g, 2.0 * var(0)); break;
        case Op::Exp: d[0] = cwise_product(g, out); break;
        case Op::Log: d[0] = cwise_product(g, reciprocal(var(0))); break;
        case Op::Reciprocal: d[0] = -cwise_product(g, square(out)); break;
        case Op::Softplus: d[0] = cwise_product(g, sigmoid(var(0))); break;
        case Op::Sigmoid: d[0] = cwise_product(g, out - square(out)); break;
        case Op::SliceRows: d[0] = pad_rows(g, at[0], node(par[0]).shape.rows); break;
        case Op::PadRows: d[0] = slice_rows(g, at[0], node(par[0]).shape.rows); break;
        case Op::BatchedMatMul: {
            const Eigen::Index ra = at[0], ca = at[1], rb = at[2], cb = at[3];
            const bool ta = at[4] != 0, tb = at[5] != 0;
            const Eigen::Index m = op_dims(ra, ca, ta).first;
            const Eigen::Index nn = op_dims(rb, cb, tb).second;
            Var a = var(0), b = var(1);
            if (keep[0]) {
                d[0] = !ta ? batched_matmul(g, m, nn, b, rb, cb, false, !tb)
                           : batched_matmul(b, rb, cb, g, m, nn, tb, true);
            }
            if (keep[1]) {
                d[1] = !tb ? batched_matmul(a, ra, ca, g, m, nn, !ta, false)
                           : batched_matmul(g, m, nn, a, ra, ca, true, ta);
            }
            break;
        }
        case Op::BatchedTranspose: d[0] = batched_transpose(g, at[1], at[0]); break;
    }
    return d;
}

std::vector<Var> Graph::gradient(Var scalar, std::span<const Var> wrt) {
    if (&scalar.graph() != this) throw std::invalid_argument("autodiff: scalar from another graph");
    const std::size_t top = scalar.id().index;
    if (node(scalar.id()).shape.rank != 0) {
        throw ShapeError("autodiff: gradient needs a 0-dimensional scalar, got " +
                         node(scalar.id()).shape.str());
    }

    // depends[i]: node i is a function of some wrt leaf.
    std::vector<char> depends(top + 1, 0);
    for (const Var& w : wrt) {
        if (w.id().index <= top) depends[w.id().index] = 1;
    }
    for (std::size_t i = 0; i <= top; ++i) {
        const Node& n = nodes_[i];
        for (std::uint8_t p = 0; p < n.arity; ++p) {
            if (depends[n.parents[p].index]) depends[i] = 1;
        }
    }
    // live[i]: node i is an ancestor of the scalar and depends on wrt.
    std::vector<char> live(top + 1, 0);
    live[top] = depends[top];
    for (std::size_t i = top + 1; i-- > 0;) {
        if (!live[i]) continue;
        const Node& n = nodes_[i];
        for (std::uint8_t p = 0; p < n.arity; ++p) {
            if (depends[n.parents[p].index]) live[n.parents[p].index] = 1;
        }
    }

    std::vector<std::vector<std::pair<std::size_t, Var>>> contrib(top + 1);
    std::vector<Var> adjoint(top + 1);
    if (live[top]) contrib[top].emplace_back(top, constant_scalar(1.0));

    for (std::size_t i = top + 1; i-- > 0;) {
        if (!live[i] || contrib[i].empty()) continue;
        auto& list = contrib[i];
        std::stable_sort(list.begin(), list.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        Var acc = list.front().second;
        for (std::size_t k = 1; k < list.size(); ++k) acc = acc + list[k].second;
        list.clear();
        list.shrink_to_fit();
        adjoint[i] = acc;
        if (nodes_[i].op == Op::Leaf) continue;
        const Node& src = nodes_[i];
        Node meta;
        meta.id = src.id;
        meta.op = src.op;
        meta.parents = src.parents;
        meta.arity = src.arity;
        meta.attrs = src.attrs;
        meta.coeff = src.coeff;
        meta.shape = src.shape;
        // Parents that do not lead to a wrt leaf get no adjoint.
        std::array<bool, 2> keep{};
        for (std::uint8_t p = 0; p < meta.arity; ++p) keep[p] = live[meta.parents[p].index] != 0;
        if (!keep[0] && !keep[1]) continue;
        const auto d = backprop_rule(meta, acc, Var{this, meta.id}, keep);
        for (std::uint8_t p = 0; p < meta.arity; ++p) {
            if (keep[p]) contrib[meta.parents[p].index].emplace_back(i, d[p]);
        }
    }

    std::vector<Var> out;
    out.reserve(wrt.size());
    for (const Var& w : wrt) {
        const std::size_t k = w.id().index;
        if (k <= top && adjoint[k].valid()) out.push_back(adjoint[k]);
        else out.push_back(zeros(node(w.id()).shape));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Expression helpers

namespace {
Graph& same_graph(Var a, Var b) {
    if (&a.graph() != &b.graph()) throw std::invalid_argument("autodiff: operands on different graphs");
    return a.graph();
}
Var binary(Op op, Var a, Var b, const std::array<Eigen::Index, 6>& at = {}) {
    Graph& g = same_graph(a, b);
    const std::array<NodeId, 2> p{a.id(), b.id()};
    return g.apply(op, p, at);
}
Var unary(Op op, Var a, const std::array<Eigen::Index, 6>& at = {}, double coeff = 0.0) {
    const std::array<NodeId, 1> p{a.id()};
    return a.graph().apply(op, p, at, coeff);
}
}  // namespace

Var operator+(Var a, Var b) { return binary(Op::Add, a, b); }
Var operator-(Var a, Var b) { return binary(Op::Sub, a, b); }
Var operator-(Var a) { return unary(Op::Scale, a, {}, -1.0); }
Var operator*(double c, Var a) { return unary(Op::Scale, a, {}, c); }
Var operator*(Var a, double c) { return unary(Op::Scale, a, {}, c); }
Var cwise_product(Var a, Var b) { return binary(Op::Mul, a, b); }
Var scalar_times(Var s, Var a) { return binary(Op::ScalarMul, s, a); }
Var matvec(Var a, Var x) { return binary(Op::MatVec, a, x); }
Var matmul(Var a, Var b) { return binary(Op::MatMul, a, b); }
Var outer(Var a, Var b) { return binary(Op::Outer, a, b); }
Var transpose(Var a) { return unary(Op::Transpose, a); }
Var sum(Var a) { return unary(Op::Sum, a); }
Var square(Var a) { return unary(Op::Square, a); }
Var exp(Var a) { return unary(Op::Exp, a); }
Var log(Var a) { return unary(Op::Log, a); }
Var reciprocal(Var a) { return unary(Op::Reciprocal, a); }
Var softplus(Var a) { return unary(Op::Softplus, a); }
Var sigmoid(Var a) { return unary(Op::Sigmoid, a); }
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
    return unary(Op::SliceRows, a, {start, count});
}
Var pad_rows(Var a, Eigen::Index start, Eigen::Index total) {
    return unary(Op::PadRows, a, {start, total});
}
Var batched_matmul(Var a, Eigen::Index ra, Eigen::Index ca, Var b, Eigen::Index rb,
                   Eigen::Index cb, bool transpose_a, bool transpose_b) {
    return binary(Op::BatchedMatMul, a, b, {ra, ca, rb, cb, transpose_a, transpose_b});
}
Var batched_transpose(Var a, Eigen::Index r, Eigen::Index c) {
    return unary(Op::BatchedTranspose, a, {r, c});
}

// ---------------------------------------------------------------------------

double check_gradient(Var f, std::span<const Var> leaves, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("check_gradient: eps must be positive");
    Graph& g = f.graph();
    std::vector<Matrix> analytic;
    {
        auto grads = g.gradient(f, leaves);
        for (const auto& v : grads) analytic.push_back(v.value());
    }
    auto evaluate_checked = [&]() {
        g.reevaluate();
        for (std::size_t i = 0; i <= f.id().index; ++i) {
            const auto& n = g.node(NodeId{i});
            if (!n.value.allFinite()) {
                throw NonFiniteError(i, "check_gradient: non-finite value at node " +
                                            std::to_string(i) + " (" +
                                            std::string(op_name(n.op)) + ")");
            }
        }
        return f.scalar();
    };

    double worst = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const NodeId id = leaves[li].id();
        const Matrix base = g.node(id).value;
        for (Eigen::Index k = 0; k < base.size(); ++k) {
            Matrix probe = base;
            probe(k) = base(k) + eps;
            g.set_leaf_value(id, probe);
            const double fp = evaluate_checked();
            probe(k) = base(k) - eps;
            g.set_leaf_value(id, probe);
            const double fm = evaluate_checked();
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[li](k);
            const double rel = std::abs(numeric - a) / std::max(std::abs(a), 1e-8);
            worst = std::max(worst, rel);
        }
        g.set_leaf_value(id, base);
    }
    g.reevaluate();
    return worst;
}

}  // namespace spnn::ad
