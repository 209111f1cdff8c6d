#ifndef XPDE_EXPRESSION_HPP
#define XPDE_EXPRESSION_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xpde/rng.hpp"
#include "xpde/sym_graph.hpp"

namespace xpde {

enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div };
enum class UnaryOp : std::uint8_t { Const0, Const1, Identity, Square, Cube, Quartic, Exp, Sin, Cos };

const char* name_of(BinaryOp op);
const char* name_of(UnaryOp op);
std::optional<BinaryOp> binary_op_from_name(const std::string& name);
std::optional<UnaryOp> unary_op_from_name(const std::string& name);

// Ordered, duplicate-free operator alphabets. The ordering is fixed because
// it indexes the controller's categorical outputs.
struct OperatorSet {
    std::vector<BinaryOp> binary;
    std::vector<UnaryOp> unary;

    // binary {+,-,*}, unary {0,1,Id,^2,^3,^4,exp,sin,cos}
    static OperatorSet defaults();

    void validate() const;
    int binary_index(BinaryOp op) const;
    int unary_index(UnaryOp op) const;
};

// Arity structure of the expression tree. Node ids are pre-order positions
// (root first, children left to right); that ordering is the one-to-one
// correspondence with operator sequences.
struct TemplateNode {
    bool is_binary = false;
    int left = -1;   // unary child for unary nodes
    int right = -1;  // second child for binary nodes
    bool is_leaf = false;
};

class TreeTemplate {
public:
    // `shape` uses a nested node-list notation: 'u' is a unary node, 'b' a
    // binary node, children in parentheses, e.g. "u(b(u,u))". Unary nodes
    // without children are leaves.
    TreeTemplate(const std::string& shape, int input_dim, bool timed = false);

    // Root unary over a binary joining the two unary leaves (4 nodes).
    static TreeTemplate depth3(int input_dim, bool timed = false);
    // Each extra depth wraps the previous tree: unary root over a binary
    // node joining the smaller tree and a fresh unary leaf.
    static TreeTemplate depth(int k, int input_dim, bool timed = false);
    static std::string shape_for_depth(int k);

    int size() const { return static_cast<int>(nodes_.size()); }
    const TemplateNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    int input_dim() const { return input_dim_; }
    bool timed() const { return timed_; }
    const std::string& shape() const { return shape_; }

    int n_binary() const { return n_binary_; }
    int n_unary() const { return n_unary_; }
    int n_leaves() const { return n_leaves_; }
    int n_interior_unary() const { return n_unary_ - n_leaves_; }

    // Offset of each node's slice in the parameter vector (-1 for binary
    // nodes). Leaves take input_dim+1 values (alpha vector, beta), interior
    // unary nodes take 2 (alpha, beta).
    int param_offset(int node) const { return param_offset_[static_cast<std::size_t>(node)]; }
    int param_count() const { return param_count_; }
    int node_param_len(int node) const;

    // Names for the spatial coordinates in rendered text: x1..xd, with t
    // first on timed domains.
    std::string coord_name(int c) const;
    // Inverse of coord_name; -1 when the name is not a coordinate.
    int coord_index(const std::string& name) const;

private:
    std::vector<TemplateNode> nodes_;
    std::vector<int> param_offset_;
    int input_dim_;
    bool timed_;
    int n_binary_ = 0, n_unary_ = 0, n_leaves_ = 0;
    int param_count_ = 0;
    std::string shape_;
};

using TreeTemplatePtr = std::shared_ptr<const TreeTemplate>;

// One operator per template node, stored in node order. `code` is the raw
// enum value (BinaryOp for binary nodes, UnaryOp for unary nodes).
struct OperatorSequence {
    std::vector<std::uint8_t> codes;

    BinaryOp binary_at(int node) const { return static_cast<BinaryOp>(codes[static_cast<std::size_t>(node)]); }
    UnaryOp unary_at(int node) const { return static_cast<UnaryOp>(codes[static_cast<std::size_t>(node)]); }
    bool operator==(const OperatorSequence&) const = default;

    std::string to_string(const TreeTemplate& tmpl) const;
};

// A finite expression: template + operator sequence + parameter vector.
// Instances are immutable values; evaluation and differentiation are pure.
class Expression {
public:
    Expression(TreeTemplatePtr tmpl, OperatorSequence ops, std::vector<double> params);

    const TreeTemplate& tmpl() const { return *tmpl_; }
    TreeTemplatePtr tmpl_ptr() const { return tmpl_; }
    const OperatorSequence& ops() const { return ops_; }
    const std::vector<double>& params() const { return params_; }

    Expression with_params(std::vector<double> params) const;

    // Bottom-up tree evaluation at one point. Throws NonFiniteError on any
    // non-finite intermediate or a division with |denominator| < 1e-12.
    double evaluate(std::span<const double> point) const;
    std::vector<double> evaluate_batch(std::span<const double> points_rowmajor, std::size_t n) const;

    // Mirrors the tree into a symbolic graph with Param references into this
    // expression's parameter layout. Derivatives and parameter gradients are
    // taken on the returned root.
    NodeId build_graph(SymGraph& g) const;

    // Infix text with explicit parentheses and full-precision numbers.
    // Constant leaves fold to their numeric value; nothing else is
    // simplified.
    std::string to_string() const;

    // Number of operator nodes in the tree (identity and the constant
    // operators count).
    int count_operators() const { return tmpl_->size(); }

private:
    TreeTemplatePtr tmpl_;
    OperatorSequence ops_;
    std::vector<double> params_;
};

// i.i.d. uniform [-1,1] parameter initialization.
std::vector<double> random_params(const TreeTemplate& tmpl, RandomStream& rng);

// Shortest round-trip decimal form, always with a '.' or exponent.
std::string format_number(double v);

// A root in a shared graph, with enough context to evaluate it. This is the
// form derivative expressions take: diff shares the parameter slots of the
// expression it came from.
struct SymExpr {
    std::shared_ptr<SymGraph> graph;
    NodeId root = kNoNode;
    int input_dim = 0;

    double eval(std::span<const double> point, std::span<const double> params = {}) const {
        return graph->eval(root, point, params);
    }
    SymExpr diff(int coord) const { return {graph, graph->diff(root, coord), input_dim}; }
};

// Wraps an expression into a standalone SymExpr (fresh graph).
SymExpr to_sym_expr(const Expression& expr);

}  // namespace xpde

#endif
