#include "bmaml/graph.hpp"

#include <algorithm>
#include <cmath>

#include "bmaml/kernels.hpp"

namespace bmaml::graph {

const char* op_name(OpCode op) {
    switch (op) {
        case OpCode::Leaf: return "leaf";
        case OpCode::Add: return "add";
        case OpCode::Sub: return "sub";
        case OpCode::Mul: return "mul";
        case OpCode::Div: return "div";
        case OpCode::Neg: return "neg";
        case OpCode::Exp: return "exp";
        case OpCode::Log: return "log";
        case OpCode::Tanh: return "tanh";
        case OpCode::Relu: return "relu";
        case OpCode::Heaviside: return "heaviside";
        case OpCode::Scale: return "scale";
        case OpCode::Shift: return "shift";
        case OpCode::MatMul: return "matmul";
        case OpCode::BcastCol: return "bcast_col";
        case OpCode::BcastRow: return "bcast_row";
        case OpCode::BcastFull: return "bcast_full";
        case OpCode::RowSum: return "rowsum";
        case OpCode::ColSum: return "colsum";
        case OpCode::SumAll: return "sum_all";
        case OpCode::LogSumExp: return "logsumexp";
        case OpCode::Slice: return "slice";
        case OpCode::Pad: return "pad";
        case OpCode::Stack: return "stack";
        case OpCode::StopGrad: return "stop_grad";
    }
    return "?";
}

NodeId Graph::push(OpCode op, int rows, int cols, NodeId a, NodeId b) {
    Node n;
    n.op = op;
    n.rows = rows;
    n.cols = cols;
    n.a = a;
    n.b = b;
    n.voff = buf_.size();
    buf_.resize(buf_.size() + static_cast<std::size_t>(rows) * cols);
    nodes_.push_back(n);
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Graph::check_finite(NodeId id) const {
    const Node& n = nodes_[id];
    const double* v = buf_.data() + n.voff;
    const std::size_t len = static_cast<std::size_t>(n.rows) * n.cols;
    for (std::size_t i = 0; i < len; ++i) {
        if (!std::isfinite(v[i]))
            throw NumericError(std::string("non-finite value produced by op '") + op_name(n.op) +
                               "'");
    }
}

void Graph::require_same_shape(NodeId a, NodeId b, const char* what) const {
    if (nodes_[a].rows != nodes_[b].rows || nodes_[a].cols != nodes_[b].cols)
        throw ContractError(std::string(what) + ": shape mismatch");
}

double Graph::value_scalar(NodeId id) const {
    if (size(id) != 1) throw ContractError("value_scalar: node is not 1x1");
    return buf_[nodes_[id].voff];
}

std::vector<double> Graph::value_copy(NodeId id) const {
    const double* v = value(id);
    return std::vector<double>(v, v + size(id));
}

void Graph::reset() {
    nodes_.clear();
    buf_.clear();
    ext_inputs_.clear();
}

// ---------------------------------------------------------------------------
// construction and forward evaluation
// ---------------------------------------------------------------------------

NodeId Graph::leaf(std::span<const double> v, int rows, int cols) {
    if (static_cast<int>(v.size()) != rows * cols)
        throw ContractError("leaf: value length does not match shape");
    NodeId id = push(OpCode::Leaf, rows, cols, kNoNode, kNoNode);
    std::copy(v.begin(), v.end(), storage(id));
    check_finite(id);
    return id;
}

NodeId Graph::scalar(double v) { return leaf(std::span<const double>(&v, 1), 1, 1); }

NodeId Graph::zeros(int rows, int cols) {
    NodeId id = push(OpCode::Leaf, rows, cols, kNoNode, kNoNode);
    std::fill_n(storage(id), static_cast<std::size_t>(rows) * cols, 0.0);
    return id;
}

#define BMAML_BINARY_OP(NAME, OPCODE, EXPR)                                       \
    NodeId Graph::NAME(NodeId a, NodeId b) {                                      \
        require_same_shape(a, b, #NAME);                                          \
        NodeId id = push(OpCode::OPCODE, nodes_[a].rows, nodes_[a].cols, a, b);    \
        const double* xa = buf_.data() + nodes_[a].voff;                          \
        const double* xb = buf_.data() + nodes_[b].voff;                          \
        double* out = storage(id);                                                \
        const std::size_t n = static_cast<std::size_t>(size(id));                 \
        for (std::size_t i = 0; i < n; ++i) out[i] = (EXPR);                      \
        check_finite(id);                                                         \
        return id;                                                                \
    }

BMAML_BINARY_OP(add, Add, xa[i] + xb[i])
BMAML_BINARY_OP(sub, Sub, xa[i] - xb[i])
BMAML_BINARY_OP(mul, Mul, xa[i] * xb[i])
BMAML_BINARY_OP(div, Div, xa[i] / xb[i])

#undef BMAML_BINARY_OP

#define BMAML_UNARY_OP(NAME, OPCODE, EXPR)                                        \
    NodeId Graph::NAME(NodeId a) {                                                \
        NodeId id = push(OpCode::OPCODE, nodes_[a].rows, nodes_[a].cols, a, kNoNode); \
        const double* xa = buf_.data() + nodes_[a].voff;                          \
        double* out = storage(id);                                                \
        const std::size_t n = static_cast<std::size_t>(size(id));                 \
        for (std::size_t i = 0; i < n; ++i) out[i] = (EXPR);                      \
        check_finite(id);                                                         \
        return id;                                                                \
    }

BMAML_UNARY_OP(neg, Neg, -xa[i])
BMAML_UNARY_OP(exp, Exp, std::exp(xa[i]))
BMAML_UNARY_OP(log, Log, std::log(xa[i]))
BMAML_UNARY_OP(tanh, Tanh, std::tanh(xa[i]))
BMAML_UNARY_OP(relu, Relu, xa[i] > 0.0 ? xa[i] : 0.0)
BMAML_UNARY_OP(heaviside, Heaviside, xa[i] > 0.0 ? 1.0 : 0.0)

#undef BMAML_UNARY_OP

NodeId Graph::scale(NodeId a, double c) {
    NodeId id = push(OpCode::Scale, nodes_[a].rows, nodes_[a].cols, a, kNoNode);
    nodes_[id].imm = c;
    const double* xa = buf_.data() + nodes_[a].voff;
    double* out = storage(id);
    const std::size_t n = static_cast<std::size_t>(size(id));
    for (std::size_t i = 0; i < n; ++i) out[i] = xa[i] * c;
    check_finite(id);
    return id;
}

NodeId Graph::shift(NodeId a, double c) {
    NodeId id = push(OpCode::Shift, nodes_[a].rows, nodes_[a].cols, a, kNoNode);
    nodes_[id].imm = c;
    const double* xa = buf_.data() + nodes_[a].voff;
    double* out = storage(id);
    const std::size_t n = static_cast<std::size_t>(size(id));
    for (std::size_t i = 0; i < n; ++i) out[i] = xa[i] + c;
    check_finite(id);
    return id;
}

NodeId Graph::matmul(NodeId a, NodeId b, bool trans_a, bool trans_b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    const int m = trans_a ? na.cols : na.rows;
    const int ka = trans_a ? na.rows : na.cols;
    const int kb = trans_b ? nb.cols : nb.rows;
    const int n = trans_b ? nb.rows : nb.cols;
    if (ka != kb) throw ContractError("matmul: inner dimensions do not match");
    NodeId id = push(OpCode::MatMul, m, n, a, b);
    nodes_[id].aux_a = trans_a;
    nodes_[id].aux_b = trans_b;
    kernels::matmul(buf_.data() + nodes_[a].voff, nodes_[a].rows, nodes_[a].cols, trans_a,
                    buf_.data() + nodes_[b].voff, nodes_[b].rows, nodes_[b].cols, trans_b,
                    storage(id));
    check_finite(id);
    return id;
}

NodeId Graph::bcast_col(NodeId v, int t) {
    if (nodes_[v].cols != 1) throw ContractError("bcast_col: input must be a column vector");
    const int r = nodes_[v].rows;
    NodeId id = push(OpCode::BcastCol, r, t, v, kNoNode);
    const double* xv = buf_.data() + nodes_[v].voff;
    double* out = storage(id);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < t; ++j) out[static_cast<std::size_t>(i) * t + j] = xv[i];
    return id;
}

NodeId Graph::bcast_row(NodeId v, int r) {
    if (nodes_[v].rows != 1) throw ContractError("bcast_row: input must be a row vector");
    const int t = nodes_[v].cols;
    NodeId id = push(OpCode::BcastRow, r, t, v, kNoNode);
    const double* xv = buf_.data() + nodes_[v].voff;
    double* out = storage(id);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < t; ++j) out[static_cast<std::size_t>(i) * t + j] = xv[j];
    return id;
}

NodeId Graph::bcast_full(NodeId s, int r, int c) {
    if (size(s) != 1) throw ContractError("bcast_full: input must be 1x1");
    NodeId id = push(OpCode::BcastFull, r, c, s, kNoNode);
    const double x = buf_[nodes_[s].voff];
    std::fill_n(storage(id), static_cast<std::size_t>(r) * c, x);
    return id;
}

NodeId Graph::rowsum(NodeId a) {
    const int r = nodes_[a].rows, t = nodes_[a].cols;
    NodeId id = push(OpCode::RowSum, r, 1, a, kNoNode);
    const double* xa = buf_.data() + nodes_[a].voff;
    double* out = storage(id);
    for (int i = 0; i < r; ++i) {
        double s = 0.0;
        for (int j = 0; j < t; ++j) s += xa[static_cast<std::size_t>(i) * t + j];
        out[i] = s;
    }
    check_finite(id);
    return id;
}

NodeId Graph::colsum(NodeId a) {
    const int r = nodes_[a].rows, t = nodes_[a].cols;
    NodeId id = push(OpCode::ColSum, 1, t, a, kNoNode);
    const double* xa = buf_.data() + nodes_[a].voff;
    double* out = storage(id);
    for (int j = 0; j < t; ++j) out[j] = 0.0;
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < t; ++j) out[j] += xa[static_cast<std::size_t>(i) * t + j];
    check_finite(id);
    return id;
}

NodeId Graph::sum_all(NodeId a) {
    NodeId id = push(OpCode::SumAll, 1, 1, a, kNoNode);
    const double* xa = buf_.data() + nodes_[a].voff;
    double s = 0.0;
    const std::size_t n = static_cast<std::size_t>(size(a));
    for (std::size_t i = 0; i < n; ++i) s += xa[i];
    *storage(id) = s;
    check_finite(id);
    return id;
}

NodeId Graph::logsumexp(NodeId v) {
    if (nodes_[v].cols != 1) throw ContractError("logsumexp: input must be a column vector");
    NodeId id = push(OpCode::LogSumExp, 1, 1, v, kNoNode);
    const double* xv = buf_.data() + nodes_[v].voff;
    const int n = nodes_[v].rows;
    double mx = xv[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, xv[i]);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(xv[i] - mx);
    *storage(id) = mx + std::log(s);
    check_finite(id);
    return id;
}

NodeId Graph::slice(NodeId a, int offset, int rows, int cols) {
    if (offset < 0 || offset + rows * cols > size(a))
        throw ContractError("slice: range exceeds source node");
    NodeId id = push(OpCode::Slice, rows, cols, a, kNoNode);
    nodes_[id].i0 = offset;
    const double* xa = buf_.data() + nodes_[a].voff;
    std::copy_n(xa + offset, static_cast<std::size_t>(rows) * cols, storage(id));
    return id;
}

NodeId Graph::pad(NodeId a, int offset, int n) {
    if (offset < 0 || offset + size(a) > n) throw ContractError("pad: segment exceeds target size");
    NodeId id = push(OpCode::Pad, n, 1, a, kNoNode);
    nodes_[id].i0 = offset;
    double* out = storage(id);
    std::fill_n(out, n, 0.0);
    const double* xa = buf_.data() + nodes_[a].voff;
    std::copy_n(xa, static_cast<std::size_t>(size(a)), out + offset);
    return id;
}

NodeId Graph::stack(std::span<const NodeId> columns) {
    if (columns.empty()) throw ContractError("stack: no inputs");
    int total = 0;
    for (NodeId c : columns) {
        if (nodes_[c].cols != 1) throw ContractError("stack: inputs must be column vectors");
        total += nodes_[c].rows;
    }
    const int ext_start = static_cast<int>(ext_inputs_.size());
    ext_inputs_.insert(ext_inputs_.end(), columns.begin(), columns.end());
    NodeId id = push(OpCode::Stack, total, 1, kNoNode, kNoNode);
    nodes_[id].ext_start = ext_start;
    nodes_[id].ext_count = static_cast<int>(columns.size());
    double* out = storage(id);
    for (NodeId c : columns) {
        const double* xc = buf_.data() + nodes_[c].voff;
        out = std::copy_n(xc, static_cast<std::size_t>(nodes_[c].rows), out);
    }
    return id;
}

NodeId Graph::stop_grad(NodeId a) {
    NodeId id = push(OpCode::StopGrad, nodes_[a].rows, nodes_[a].cols, a, kNoNode);
    const double* xa = buf_.data() + nodes_[a].voff;
    std::copy_n(xa, static_cast<std::size_t>(size(a)), storage(id));
    return id;
}

// ---------------------------------------------------------------------------
// reverse-mode differentiation by node emission
// ---------------------------------------------------------------------------

NodeId Graph::gradient(NodeId f, NodeId wrt) {
    NodeId targets[1] = {wrt};
    return gradient(f, std::span<const NodeId>(targets, 1))[0];
}

std::vector<NodeId> Graph::gradient(NodeId f, std::span<const NodeId> wrt) {
    if (size(f) != 1) throw ContractError("gradient: differentiated node must be 1x1");

    // needs[i]: node i can reach one of the targets through differentiable ops.
    std::vector<char> needs(static_cast<std::size_t>(f) + 1, 0);
    for (NodeId t : wrt) {
        if (t > f) throw ContractError("gradient: target created after the differentiated node");
        needs[t] = 1;
    }
    for (NodeId i = 0; i <= f; ++i) {
        const Node& n = nodes_[i];
        if (n.op == OpCode::StopGrad || n.op == OpCode::Heaviside) continue;
        bool dep = false;
        if (n.a != kNoNode && needs[n.a]) dep = true;
        if (n.b != kNoNode && needs[n.b]) dep = true;
        for (int e = 0; e < n.ext_count && !dep; ++e)
            if (needs[ext_inputs_[n.ext_start + e]]) dep = true;
        if (dep) needs[i] = 1;
    }

    std::vector<NodeId> adj(static_cast<std::size_t>(f) + 1, kNoNode);
    auto accumulate = [&](NodeId target, NodeId contribution) {
        adj[target] = adj[target] == kNoNode ? contribution : add(adj[target], contribution);
    };

    adj[f] = scalar(1.0);
    if (!needs[f]) {
        // f does not depend on any target; all gradients are zero.
    }
    for (NodeId i = f; i >= 0; --i) {
        if (adj[i] == kNoNode || !needs[i]) continue;
        const Node n = nodes_[i];  // copy: nodes_ may reallocate during emission
        const NodeId g = adj[i];
        switch (n.op) {
            case OpCode::Leaf:
            case OpCode::Heaviside:
            case OpCode::StopGrad:
                break;
            case OpCode::Add:
                if (needs[n.a]) accumulate(n.a, g);
                if (needs[n.b]) accumulate(n.b, g);
                break;
            case OpCode::Sub:
                if (needs[n.a]) accumulate(n.a, g);
                if (needs[n.b]) accumulate(n.b, neg(g));
                break;
            case OpCode::Mul:
                if (needs[n.a]) accumulate(n.a, mul(g, n.b));
                if (needs[n.b]) accumulate(n.b, mul(g, n.a));
                break;
            case OpCode::Div:
                if (needs[n.a]) accumulate(n.a, div(g, n.b));
                if (needs[n.b]) accumulate(n.b, neg(mul(g, div(i, n.b))));
                break;
            case OpCode::Neg:
                if (needs[n.a]) accumulate(n.a, neg(g));
                break;
            case OpCode::Exp:
                if (needs[n.a]) accumulate(n.a, mul(g, i));
                break;
            case OpCode::Log:
                if (needs[n.a]) accumulate(n.a, div(g, n.a));
                break;
            case OpCode::Tanh:
                if (needs[n.a]) accumulate(n.a, mul(g, shift(neg(mul(i, i)), 1.0)));
                break;
            case OpCode::Relu:
                if (needs[n.a]) accumulate(n.a, mul(g, heaviside(n.a)));
                break;
            case OpCode::Scale:
                if (needs[n.a]) accumulate(n.a, scale(g, n.imm));
                break;
            case OpCode::Shift:
                if (needs[n.a]) accumulate(n.a, g);
                break;
            case OpCode::MatMul: {
                const bool ta = n.aux_a, tb = n.aux_b;
                if (needs[n.a]) {
                    NodeId da = !ta ? (!tb ? matmul(g, n.b, false, true) : matmul(g, n.b))
                                    : (!tb ? matmul(n.b, g, false, true) : matmul(n.b, g, true, true));
                    accumulate(n.a, da);
                }
                if (needs[n.b]) {
                    NodeId db = !tb ? (!ta ? matmul(n.a, g, true, false) : matmul(n.a, g))
                                    : (!ta ? matmul(g, n.a, true, false) : matmul(g, n.a, true, true));
                    accumulate(n.b, db);
                }
                break;
            }
            case OpCode::BcastCol:
                if (needs[n.a]) accumulate(n.a, rowsum(g));
                break;
            case OpCode::BcastRow:
                if (needs[n.a]) accumulate(n.a, colsum(g));
                break;
            case OpCode::BcastFull:
                if (needs[n.a]) accumulate(n.a, sum_all(g));
                break;
            case OpCode::RowSum:
                if (needs[n.a]) accumulate(n.a, bcast_col(g, nodes_[n.a].cols));
                break;
            case OpCode::ColSum:
                if (needs[n.a]) accumulate(n.a, bcast_row(g, nodes_[n.a].rows));
                break;
            case OpCode::SumAll:
                if (needs[n.a]) accumulate(n.a, bcast_full(g, nodes_[n.a].rows, nodes_[n.a].cols));
                break;
            case OpCode::LogSumExp:
                if (needs[n.a]) {
                    // softmax = exp(v - lse); pulled back as g * softmax
                    NodeId sm = exp(sub(n.a, bcast_full(i, nodes_[n.a].rows, 1)));
                    accumulate(n.a, mul(bcast_full(g, nodes_[n.a].rows, 1), sm));
                }
                break;
            case OpCode::Slice:
                if (needs[n.a]) {
                    NodeId contrib = pad(g, n.i0, size(n.a));
                    if (nodes_[n.a].cols != 1) {
                        // flatten/unflatten is a no-op on row-major storage,
                        // but the accumulated adjoint must match shapes.
                        contrib = slice(contrib, 0, nodes_[n.a].rows, nodes_[n.a].cols);
                    }
                    accumulate(n.a, contrib);
                }
                break;
            case OpCode::Pad:
                if (needs[n.a]) accumulate(n.a, slice(g, n.i0, nodes_[n.a].rows, nodes_[n.a].cols));
                break;
            case OpCode::Stack: {
                int off = 0;
                for (int e = 0; e < n.ext_count; ++e) {
                    NodeId src = ext_inputs_[n.ext_start + e];
                    if (needs[src]) accumulate(src, slice(g, off, nodes_[src].rows, 1));
                    off += nodes_[src].rows;
                }
                break;
            }
        }
    }

    std::vector<NodeId> out;
    out.reserve(wrt.size());
    for (NodeId t : wrt) out.push_back(adj[t] != kNoNode ? adj[t] : zeros(rows(t), cols(t)));
    return out;
}

// ---------------------------------------------------------------------------
// function-level helpers
// ---------------------------------------------------------------------------

std::vector<double> grad(const ScalarField& f, std::span<const double> x) {
    Graph g;
    NodeId xn = g.leaf(x, static_cast<int>(x.size()), 1);
    NodeId fn = f(g, xn);
    return g.value_copy(g.gradient(fn, xn));
}

std::vector<double> hvp(const ScalarField& f, std::span<const double> x,
                        std::span<const double> v) {
    if (x.size() != v.size()) throw ContractError("hvp: direction length must match input length");
    Graph g;
    NodeId xn = g.leaf(x, static_cast<int>(x.size()), 1);
    NodeId fn = f(g, xn);
    NodeId gn = g.gradient(fn, xn);
    NodeId vn = g.leaf(v, static_cast<int>(v.size()), 1);
    NodeId s = g.dot(gn, vn);
    return g.value_copy(g.gradient(s, xn));
}

std::vector<double> finite_diff_grad(const PlainField& f, std::span<const double> x, double h) {
    if (h <= 0.0) throw ContractError("finite_diff_grad: step must be positive");
    std::vector<double> xp(x.begin(), x.end());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = xp[i];
        xp[i] = orig + h;
        const double fp = f(xp);
        xp[i] = orig - h;
        const double fm = f(xp);
        xp[i] = orig;
        out[i] = (fp - fm) / (2.0 * h);
    }
    return out;
}

double eval_field(const ScalarField& f, std::span<const double> x) {
    Graph g;
    NodeId xn = g.leaf(x, static_cast<int>(x.size()), 1);
    return g.value_scalar(f(g, xn));
}

}  // namespace bmaml::graph
