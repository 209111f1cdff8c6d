#ifndef XPDE_SYM_GRAPH_HPP
#define XPDE_SYM_GRAPH_HPP

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace xpde {

enum class SymOp : std::uint8_t {
    Const,   // payload: value
    Coord,   // payload: input coordinate index
    Param,   // payload: parameter slot
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    PowInt,  // payload: integer exponent >= 2
    Exp,
    Sin,
    Cos,
};

using NodeId = std::int32_t;
constexpr NodeId kNoNode = -1;

struct SymNode {
    SymOp op;
    NodeId a = kNoNode;
    NodeId b = kNoNode;
    std::int32_t idx = 0;  // Coord/Param index or PowInt exponent
    double value = 0.0;    // Const payload
};

// A hash-consed DAG of scalar expressions over input coordinates and
// parameter slots. Children always have smaller ids than their parents, so
// ascending id order is a topological order. Construction folds constants
// and applies the identity rewrites (x+0, x*1, x*0, x^1, ...); Param nodes
// are never folded, so parameter gradients keep their exact structure.
//
// Derivatives are memoized per (node, coordinate); repeated differentiation
// of shared subgraphs stays polynomial in graph size.
class SymGraph {
public:
    SymGraph();

    NodeId constant(double v);
    NodeId coord(int i);
    NodeId param(int slot);

    NodeId add(NodeId x, NodeId y);
    NodeId sub(NodeId x, NodeId y);
    NodeId mul(NodeId x, NodeId y);
    NodeId div(NodeId x, NodeId y);
    NodeId neg(NodeId x);
    NodeId pow_int(NodeId x, int n);
    NodeId exp(NodeId x);
    NodeId sin(NodeId x);
    NodeId cos(NodeId x);

    NodeId zero() const { return zero_; }
    NodeId one() const { return one_; }

    // Exact partial derivative with respect to input coordinate `coord_index`.
    NodeId diff(NodeId root, int coord_index);
    // Sum of second derivatives over the given coordinates.
    NodeId laplacian(NodeId root, std::span<const int> coords);
    // Sum over coords of (d root / d x_c)^2.
    NodeId grad_norm_sq(NodeId root, std::span<const int> coords);

    std::size_t size() const { return nodes_.size(); }
    const SymNode& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }

    // Single-point evaluation (recursion-free, evaluates the needed
    // sub-DAG). Throws NonFiniteError on inf/NaN intermediates and on
    // |denominator| < 1e-12.
    double eval(NodeId root, std::span<const double> point, std::span<const double> params) const;

    // Number of operator nodes (everything except Const/Coord/Param leaves)
    // in the sub-DAG reachable from root.
    int count_operator_nodes(NodeId root) const;

    // Nodes reachable from the given roots, ascending (= topological) order.
    std::vector<NodeId> reachable(std::span<const NodeId> roots) const;

    static constexpr double kDivGuard = 1e-12;

private:
    NodeId push(SymOp op, NodeId a, NodeId b, std::int32_t idx, double value);
    NodeId intern(SymOp op, NodeId a, NodeId b, std::int32_t idx, double value);
    bool is_const(NodeId id, double v) const;
    bool is_const(NodeId id) const { return node(id).op == SymOp::Const; }

    struct Key {
        SymOp op;
        NodeId a;
        NodeId b;
        std::int32_t idx;
        std::uint64_t value_bits;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const;
    };

    std::vector<SymNode> nodes_;
    std::unordered_map<Key, NodeId, KeyHash> interned_;
    std::unordered_map<std::uint64_t, NodeId> diff_memo_;  // (node, coord) -> derivative
    NodeId zero_;
    NodeId one_;
};

}  // namespace xpde

#endif
