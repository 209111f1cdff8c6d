#include "xpde/sym_graph.hpp"

#include <cmath>
#include <cstring>
#include <functional>

#include "xpde/errors.hpp"

namespace xpde {

namespace {

std::uint64_t bits_of(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, sizeof u);
    return u;
}

}  // namespace

std::size_t SymGraph::KeyHash::operator()(const Key& k) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    mix(static_cast<std::uint64_t>(k.op));
    mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.a)));
    mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.b)));
    mix(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.idx)));
    mix(k.value_bits);
    return static_cast<std::size_t>(h);
}

SymGraph::SymGraph() {
    zero_ = constant(0.0);
    one_ = constant(1.0);
}

NodeId SymGraph::push(SymOp op, NodeId a, NodeId b, std::int32_t idx, double value) {
    nodes_.push_back(SymNode{op, a, b, idx, value});
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId SymGraph::intern(SymOp op, NodeId a, NodeId b, std::int32_t idx, double value) {
    Key k{op, a, b, idx, bits_of(value)};
    auto it = interned_.find(k);
    if (it != interned_.end()) return it->second;
    NodeId id = push(op, a, b, idx, value);
    interned_.emplace(k, id);
    return id;
}

bool SymGraph::is_const(NodeId id, double v) const {
    const SymNode& n = node(id);
    return n.op == SymOp::Const && n.value == v;
}

NodeId SymGraph::constant(double v) { return intern(SymOp::Const, kNoNode, kNoNode, 0, v); }
NodeId SymGraph::coord(int i) { return intern(SymOp::Coord, kNoNode, kNoNode, i, 0.0); }
NodeId SymGraph::param(int slot) { return intern(SymOp::Param, kNoNode, kNoNode, slot, 0.0); }

NodeId SymGraph::add(NodeId x, NodeId y) {
    if (is_const(x) && is_const(y)) return constant(node(x).value + node(y).value);
    if (is_const(x, 0.0)) return y;
    if (is_const(y, 0.0)) return x;
    return intern(SymOp::Add, x, y, 0, 0.0);
}

NodeId SymGraph::sub(NodeId x, NodeId y) {
    if (is_const(x) && is_const(y)) return constant(node(x).value - node(y).value);
    if (is_const(y, 0.0)) return x;
    if (is_const(x, 0.0)) return neg(y);
    return intern(SymOp::Sub, x, y, 0, 0.0);
}

NodeId SymGraph::mul(NodeId x, NodeId y) {
    if (is_const(x) && is_const(y)) return constant(node(x).value * node(y).value);
    if (is_const(x, 0.0) || is_const(y, 0.0)) return zero_;
    if (is_const(x, 1.0)) return y;
    if (is_const(y, 1.0)) return x;
    return intern(SymOp::Mul, x, y, 0, 0.0);
}

NodeId SymGraph::div(NodeId x, NodeId y) {
    if (is_const(x) && is_const(y) && std::abs(node(y).value) >= kDivGuard)
        return constant(node(x).value / node(y).value);
    if (is_const(y, 1.0)) return x;
    return intern(SymOp::Div, x, y, 0, 0.0);
}

NodeId SymGraph::neg(NodeId x) {
    if (is_const(x)) return constant(-node(x).value);
    if (node(x).op == SymOp::Neg) return node(x).a;
    return intern(SymOp::Neg, x, kNoNode, 0, 0.0);
}

NodeId SymGraph::pow_int(NodeId x, int n) {
    if (n < 0) throw UnsupportedOperatorError("pow_int: negative exponent");
    if (n == 0) return one_;
    if (n == 1) return x;
    if (is_const(x)) {
        double v = 1.0;
        for (int i = 0; i < n; ++i) v *= node(x).value;
        return constant(v);
    }
    return intern(SymOp::PowInt, x, kNoNode, n, 0.0);
}

NodeId SymGraph::exp(NodeId x) {
    if (is_const(x)) return constant(std::exp(node(x).value));
    return intern(SymOp::Exp, x, kNoNode, 0, 0.0);
}

NodeId SymGraph::sin(NodeId x) {
    if (is_const(x)) return constant(std::sin(node(x).value));
    return intern(SymOp::Sin, x, kNoNode, 0, 0.0);
}

NodeId SymGraph::cos(NodeId x) {
    if (is_const(x)) return constant(std::cos(node(x).value));
    return intern(SymOp::Cos, x, kNoNode, 0, 0.0);
}

NodeId SymGraph::diff(NodeId root, int coord_index) {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(root)) << 32) |
        static_cast<std::uint32_t>(coord_index);
    auto memo = diff_memo_.find(key);
    if (memo != diff_memo_.end()) return memo->second;

    const SymNode n = node(root);
    NodeId d;
    switch (n.op) {
        case SymOp::Const:
        case SymOp::Param:
            d = zero_;
            break;
        case SymOp::Coord:
            d = (n.idx == coord_index) ? one_ : zero_;
            break;
        case SymOp::Add:
            d = add(diff(n.a, coord_index), diff(n.b, coord_index));
            break;
        case SymOp::Sub:
            d = sub(diff(n.a, coord_index), diff(n.b, coord_index));
            break;
        case SymOp::Mul:
            d = add(mul(diff(n.a, coord_index), n.b), mul(n.a, diff(n.b, coord_index)));
            break;
        case SymOp::Div: {
            // (a/b)' = a'/b - a b'/b^2
            NodeId da = diff(n.a, coord_index);
            NodeId db = diff(n.b, coord_index);
            d = sub(div(da, n.b), div(mul(n.a, db), mul(n.b, n.b)));
            break;
        }
        case SymOp::Neg:
            d = neg(diff(n.a, coord_index));
            break;
        case SymOp::PowInt:
            d = mul(mul(constant(static_cast<double>(n.idx)), pow_int(n.a, n.idx - 1)),
                    diff(n.a, coord_index));
            break;
        case SymOp::Exp:
            d = mul(exp(n.a), diff(n.a, coord_index));
            break;
        case SymOp::Sin:
            d = mul(cos(n.a), diff(n.a, coord_index));
            break;
        case SymOp::Cos:
            d = neg(mul(sin(n.a), diff(n.a, coord_index)));
            break;
        default:
            throw UnsupportedOperatorError("diff: unknown operator");
    }
    diff_memo_.emplace(key, d);
    return d;
}

NodeId SymGraph::laplacian(NodeId root, std::span<const int> coords) {
    NodeId acc = zero_;
    for (int c : coords) acc = add(acc, diff(diff(root, c), c));
    return acc;
}

NodeId SymGraph::grad_norm_sq(NodeId root, std::span<const int> coords) {
    NodeId acc = zero_;
    for (int c : coords) {
        NodeId g = diff(root, c);
        acc = add(acc, mul(g, g));
    }
    return acc;
}

std::vector<NodeId> SymGraph::reachable(std::span<const NodeId> roots) const {
    std::vector<char> mark(nodes_.size(), 0);
    std::vector<NodeId> stack(roots.begin(), roots.end());
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        if (mark[static_cast<std::size_t>(id)]) continue;
        mark[static_cast<std::size_t>(id)] = 1;
        const SymNode& n = node(id);
        if (n.a != kNoNode) stack.push_back(n.a);
        if (n.b != kNoNode) stack.push_back(n.b);
    }
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < mark.size(); ++i)
        if (mark[i]) out.push_back(static_cast<NodeId>(i));
    return out;
}

double SymGraph::eval(NodeId root, std::span<const double> point, std::span<const double> params) const {
    const NodeId roots[1] = {root};
    std::vector<NodeId> order = reachable(roots);
    std::vector<double> val(nodes_.size());
    for (NodeId id : order) {
        const SymNode& n = node(id);
        double v = 0.0;
        switch (n.op) {
            case SymOp::Const: v = n.value; break;
            case SymOp::Coord: v = point[static_cast<std::size_t>(n.idx)]; break;
            case SymOp::Param: v = params[static_cast<std::size_t>(n.idx)]; break;
            case SymOp::Add: v = val[static_cast<std::size_t>(n.a)] + val[static_cast<std::size_t>(n.b)]; break;
            case SymOp::Sub: v = val[static_cast<std::size_t>(n.a)] - val[static_cast<std::size_t>(n.b)]; break;
            case SymOp::Mul: v = val[static_cast<std::size_t>(n.a)] * val[static_cast<std::size_t>(n.b)]; break;
            case SymOp::Div: {
                const double den = val[static_cast<std::size_t>(n.b)];
                if (std::abs(den) < kDivGuard) throw NonFiniteError("eval: denominator below guard");
                v = val[static_cast<std::size_t>(n.a)] / den;
                break;
            }
            case SymOp::Neg: v = -val[static_cast<std::size_t>(n.a)]; break;
            case SymOp::PowInt: {
                const double x = val[static_cast<std::size_t>(n.a)];
                v = x;
                for (int i = 1; i < n.idx; ++i) v *= x;
                break;
            }
            case SymOp::Exp: v = std::exp(val[static_cast<std::size_t>(n.a)]); break;
            case SymOp::Sin: v = std::sin(val[static_cast<std::size_t>(n.a)]); break;
            case SymOp::Cos: v = std::cos(val[static_cast<std::size_t>(n.a)]); break;
        }
        if (!std::isfinite(v)) throw NonFiniteError("eval: non-finite intermediate");
        val[static_cast<std::size_t>(id)] = v;
    }
    return val[static_cast<std::size_t>(root)];
}

int SymGraph::count_operator_nodes(NodeId root) const {
    const NodeId roots[1] = {root};
    int count = 0;
    for (NodeId id : reachable(roots)) {
        const SymOp op = node(id).op;
        if (op != SymOp::Const && op != SymOp::Coord && op != SymOp::Param) ++count;
    }
    return count;
}

}  // namespace xpde
