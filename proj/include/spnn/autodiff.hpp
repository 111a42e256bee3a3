#pragma once

// Reverse-mode differentiation over dense float64 arrays.
//
// A Graph is an append-only arena of nodes. Every primitive is evaluated
// eagerly when it is applied, and the reverse pass emits ordinary graph nodes
// for the adjoints, so a gradient can itself be differentiated again.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(std::size_t node, const std::string& what)
        : std::runtime_error(what), node_(node) {}
    std::size_t node() const noexcept { return node_; }

private:
    std::size_t node_;
};

namespace ad {

struct NodeId {
    std::size_t index = static_cast<std::size_t>(-1);

    bool valid() const noexcept { return index != static_cast<std::size_t>(-1); }
    bool operator==(const NodeId&) const = default;
};

// rank 0 is a scalar (stored 1x1), rank 1 a column vector (rows x 1),
// rank 2 a matrix.
struct Shape {
    int rank = 0;
    Eigen::Index rows = 1;
    Eigen::Index cols = 1;

    static Shape scalar() { return {0, 1, 1}; }
    static Shape vector(Eigen::Index n) { return {1, n, 1}; }
    static Shape matrix(Eigen::Index r, Eigen::Index c) { return {2, r, c}; }

    Eigen::Index size() const { return rows * cols; }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,          // elementwise
    Scale,        // constant double times array
    ScalarMul,    // rank-0 node times array
    MatVec,
    MatMul,
    Outer,        // rank-1 x rank-1 -> rank-2
    Transpose,
    Sum,          // all entries -> scalar
    Square,
    Exp,
    Log,
    Reciprocal,
    Softplus,
    Sigmoid,
    SliceRows,    // attrs: start, count
    PadRows,      // attrs: start, total rows
    BatchedMatMul,// attrs: ra, ca, rb, cb, transpose a, transpose b
    BatchedTranspose, // attrs: r, c
};

std::string_view op_name(Op op);

enum class LeafKind : std::uint8_t { Constant, Input, Parameter };

struct Node {
    NodeId id;
    Op op = Op::Leaf;
    LeafKind leaf = LeafKind::Constant;
    std::array<NodeId, 2> parents{};
    std::uint8_t arity = 0;
    std::array<Eigen::Index, 6> attrs{};
    double coeff = 0.0;
    Shape shape;
    Matrix value;
};

class Graph;

// Lightweight handle used to write expressions; valid while its Graph lives.
class Var {
public:
    Var() = default;
    Var(Graph* g, NodeId id) : graph_(g), id_(id) {}

    Graph& graph() const { return *graph_; }
    NodeId id() const { return id_; }
    bool valid() const { return graph_ != nullptr && id_.valid(); }

    const Matrix& value() const;
    const Shape& shape() const;
    double scalar() const;

private:
    Graph* graph_ = nullptr;
    NodeId id_{};
};

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    Var constant(Matrix value, Shape shape);
    Var constant_scalar(double v);
    Var constant_vector(const Vector& v);
    Var constant_matrix(const Matrix& m);
    Var zeros(Shape shape);

    Var input(const Matrix& m);
    Var input(const Vector& v);
    Var parameter(const Matrix& m);
    Var parameter(const Vector& v);

    // Generic entry point; checks shapes, evaluates, records the node.
    Var apply(Op op, std::span<const NodeId> parents,
              const std::array<Eigen::Index, 6>& attrs = {}, double coeff = 0.0);

    // One handle per wrt leaf, each holding d(scalar)/d(leaf) as a graph node.
    std::vector<Var> gradient(Var scalar, std::span<const Var> wrt);

    // Recomputes every derived node from the current leaf values, in id order.
    void reevaluate();
    void set_leaf_value(NodeId id, const Matrix& value);

    const Node& node(NodeId id) const { return nodes_.at(id.index); }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<NodeId>& inputs() const { return inputs_; }
    const std::vector<NodeId>& parameters() const { return parameters_; }

private:
    Var add_leaf(Matrix value, Shape shape, LeafKind kind);
    void evaluate(Node& n) const;
    Shape infer_shape(Op op, std::span<const NodeId> parents,
                      const std::array<Eigen::Index, 6>& attrs) const;
    // Adjoint contribution of node `n` to each parent slot flagged in `keep`.
    std::array<Var, 2> backprop_rule(const Node& n, Var g, Var out, std::array<bool, 2> keep);

    std::vector<Node> nodes_;
    std::vector<NodeId> inputs_;
    std::vector<NodeId> parameters_;
};

// Expression helpers. All operands must live on the same graph.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator-(Var a);
Var operator*(double c, Var a);
Var operator*(Var a, double c);
Var cwise_product(Var a, Var b);
Var scalar_times(Var s, Var a);
Var matvec(Var a, Var x);
Var matmul(Var a, Var b);
Var outer(Var a, Var b);
Var transpose(Var a);
Var sum(Var a);
Var square(Var a);
Var exp(Var a);
Var log(Var a);
Var reciprocal(Var a);
Var softplus(Var a);
Var sigmoid(Var a);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var pad_rows(Var a, Eigen::Index start, Eigen::Index total);

// Column n of each operand holds one row-major matrix; the result column n is
// op(A_n) * op(B_n), packed row-major.
Var batched_matmul(Var a, Eigen::Index ra, Eigen::Index ca, Var b, Eigen::Index rb,
                   Eigen::Index cb, bool transpose_a = false, bool transpose_b = false);
Var batched_transpose(Var a, Eigen::Index r, Eigen::Index c);

inline std::vector<Var> gradient(Var scalar, std::span<const Var> wrt) {
    return scalar.graph().gradient(scalar, wrt);
}
inline Var gradient(Var scalar, Var wrt) {
    return scalar.graph().gradient(scalar, std::span<const Var>(&wrt, 1)).front();
}

// Central differences against the analytic gradient of `f` for every entry of
// every leaf. Returns the worst relative error, using max(|analytic|, 1e-8) as
// denominator. Leaf values are restored before returning.
double check_gradient(Var f, std::span<const Var> leaves, double eps);

}  // namespace ad
}  // namespace spnn
