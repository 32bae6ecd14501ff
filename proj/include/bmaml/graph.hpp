#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bmaml/errors.hpp"

namespace bmaml::graph {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

enum class OpCode : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Tanh,
    Relu,
    Heaviside,
    Scale,      // x * imm
    Shift,      // x + imm
    MatMul,     // op(a) * op(b), transpose flags in aux
    BcastCol,   // r x 1 -> r x T
    BcastRow,   // 1 x T -> r x T
    BcastFull,  // 1 x 1 -> r x c
    RowSum,     // r x T -> r x 1
    ColSum,     // r x T -> 1 x T
    SumAll,     // r x c -> 1 x 1
    LogSumExp,  // n x 1 -> 1 x 1, max-shifted
    Slice,      // flat segment of a, reshaped r x c
    Pad,        // flat a placed at offset inside zeros(n x 1)
    Stack,      // variadic column vectors -> concatenated column
    StopGrad,   // identity value, blocks differentiation
};

const char* op_name(OpCode op);

/// Dynamically built computation graph over row-major matrices of doubles.
///
/// Nodes are evaluated eagerly on construction and stored in one value arena.
/// gradient() runs reverse-mode accumulation by emitting new nodes into the
/// same graph, so its outputs are themselves differentiable; applying
/// gradient() to them yields exact second derivatives (and so on). Every op
/// result is checked for non-finite entries.
///
/// A Graph instance is single-threaded; independent instances may be used
/// from different threads with no shared state.
class Graph {
public:
    Graph() = default;

    // -- construction -------------------------------------------------------
    NodeId leaf(std::span<const double> v, int rows, int cols = 1);
    NodeId scalar(double v);
    NodeId zeros(int rows, int cols = 1);

    // -- elementwise, equal shapes ------------------------------------------
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);

    // -- elementwise, unary --------------------------------------------------
    NodeId neg(NodeId a);
    NodeId exp(NodeId a);
    NodeId log(NodeId a);
    NodeId tanh(NodeId a);
    NodeId relu(NodeId a);       // derivative at 0 defined as 0
    NodeId heaviside(NodeId a);  // 1 where a > 0 else 0; derivative 0
    NodeId scale(NodeId a, double c);
    NodeId shift(NodeId a, double c);

    // -- linear algebra -------------------------------------------------------
    NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);

    // -- broadcast / reduce ---------------------------------------------------
    NodeId bcast_col(NodeId v, int t);             // r x 1 -> r x t
    NodeId bcast_row(NodeId v, int r);             // 1 x t -> r x t
    NodeId bcast_full(NodeId s, int r, int c);     // 1 x 1 -> r x c
    NodeId rowsum(NodeId a);                       // r x t -> r x 1
    NodeId colsum(NodeId a);                       // r x t -> 1 x t
    NodeId sum_all(NodeId a);                      // -> 1 x 1
    NodeId logsumexp(NodeId v);                    // n x 1 -> 1 x 1

    // -- structure ------------------------------------------------------------
    NodeId slice(NodeId a, int offset, int rows, int cols = 1);
    NodeId pad(NodeId a, int offset, int n);
    NodeId stack(std::span<const NodeId> columns);
    NodeId stop_grad(NodeId a);

    // -- composites -----------------------------------------------------------
    NodeId dot(NodeId a, NodeId b) { return sum_all(mul(a, b)); }
    NodeId sq_norm(NodeId a) { return dot(a, a); }

    // -- inspection -----------------------------------------------------------
    int rows(NodeId id) const { return nodes_[id].rows; }
    int cols(NodeId id) const { return nodes_[id].cols; }
    int size(NodeId id) const { return nodes_[id].rows * nodes_[id].cols; }
    /// Pointer into the arena; invalidated by the next node construction.
    const double* value(NodeId id) const { return buf_.data() + nodes_[id].voff; }
    double value_scalar(NodeId id) const;
    std::vector<double> value_copy(NodeId id) const;

    std::size_t node_count() const { return nodes_.size(); }

    /// Reverse-mode differentiation of scalar f with respect to each entry of
    /// wrt. Emits the accumulation as new graph nodes and returns, per target,
    /// the node holding df/d(target) (a zeros node when f does not depend on
    /// it). The returned nodes participate in further differentiation.
    std::vector<NodeId> gradient(NodeId f, std::span<const NodeId> wrt);
    NodeId gradient(NodeId f, NodeId wrt);

    /// Drop all nodes and values. Invalidates every NodeId.
    void reset();

private:
    struct Node {
        OpCode op;
        bool aux_a = false, aux_b = false;  // matmul transpose flags
        int rows = 0, cols = 0;
        NodeId a = kNoNode, b = kNoNode;
        std::size_t voff = 0;
        int i0 = 0, i1 = 0;       // slice/pad offsets and sizes
        double imm = 0.0;         // scale/shift immediate
        int ext_start = 0, ext_count = 0;  // stack inputs
    };

    NodeId push(OpCode op, int rows, int cols, NodeId a, NodeId b);
    double* storage(NodeId id) { return buf_.data() + nodes_[id].voff; }
    void check_finite(NodeId id) const;
    void require_same_shape(NodeId a, NodeId b, const char* what) const;

    std::vector<Node> nodes_;
    std::vector<double> buf_;
    std::vector<NodeId> ext_inputs_;
};

/// Builder for a differentiable scalar function of one flat vector input.
using ScalarField = std::function<NodeId(Graph&, NodeId)>;

/// Plain (value-only) scalar function used by the finite-difference oracle.
using PlainField = std::function<double(std::span<const double>)>;

/// df/dx evaluated at x. The graph is built, differentiated, and discarded.
std::vector<double> grad(const ScalarField& f, std::span<const double> x);

/// Hessian-vector product (d2f/dx2) v, computed as the gradient of <grad f, v>.
std::vector<double> hvp(const ScalarField& f, std::span<const double> x,
                        std::span<const double> v);

/// Central-difference gradient estimate with step h.
std::vector<double> finite_diff_grad(const PlainField& f, std::span<const double> x, double h);

/// Evaluate a ScalarField at raw values (convenience for oracles).
double eval_field(const ScalarField& f, std::span<const double> x);

}  // namespace bmaml::graph
