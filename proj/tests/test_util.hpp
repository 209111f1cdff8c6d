#ifndef XPDE_TEST_UTIL_HPP
#define XPDE_TEST_UTIL_HPP

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "xpde/expression.hpp"
#include "xpde/rng.hpp"

namespace xpde::test {

inline double rel_err(double got, double want) {
    const double scale = std::max({1.0, std::abs(got), std::abs(want)});
    return std::abs(got - want) / scale;
}

// Straightforward recursive interpreter of the expression tree, kept
// independent of the library's evaluators on purpose: it is the oracle the
// optimized paths are checked against.
inline double naive_eval_node(const Expression& e, int node, std::span<const double> x) {
    const TreeTemplate& t = e.tmpl();
    const TemplateNode& n = t.node(node);
    auto unary = [](UnaryOp op, double v) -> double {
        switch (op) {
            case UnaryOp::Const0: return 0.0;
            case UnaryOp::Const1: return 1.0;
            case UnaryOp::Identity: return v;
            case UnaryOp::Square: return std::pow(v, 2.0);
            case UnaryOp::Cube: return std::pow(v, 3.0);
            case UnaryOp::Quartic: return std::pow(v, 4.0);
            case UnaryOp::Exp: return std::exp(v);
            case UnaryOp::Sin: return std::sin(v);
            case UnaryOp::Cos: return std::cos(v);
        }
        return 0.0;
    };
    if (n.is_binary) {
        const double l = naive_eval_node(e, n.left, x);
        const double r = naive_eval_node(e, n.right, x);
        switch (e.ops().binary_at(node)) {
            case BinaryOp::Add: return l + r;
            case BinaryOp::Sub: return l - r;
            case BinaryOp::Mul: return l * r;
            case BinaryOp::Div: return l / r;
        }
        return 0.0;
    }
    const UnaryOp op = e.ops().unary_at(node);
    const int off = t.param_offset(node);
    if (n.is_leaf) {
        double acc = e.params()[static_cast<std::size_t>(off + t.input_dim())];
        for (int c = 0; c < t.input_dim(); ++c)
            acc += e.params()[static_cast<std::size_t>(off + c)] * unary(op, x[static_cast<std::size_t>(c)]);
        return acc;
    }
    const double child = naive_eval_node(e, n.left, x);
    return e.params()[static_cast<std::size_t>(off)] * unary(op, child) +
           e.params()[static_cast<std::size_t>(off + 1)];
}

inline double naive_eval(const Expression& e, std::span<const double> x) {
    return naive_eval_node(e, 0, x);
}

// Uniform random operator sequence for a template; `allow_div` keeps the
// division-free default alphabet unless a test opts in.
inline OperatorSequence random_sequence(const TreeTemplate& t, const OperatorSet& ops,
                                        RandomStream& rng) {
    OperatorSequence seq;
    seq.codes.resize(static_cast<std::size_t>(t.size()));
    for (int i = 0; i < t.size(); ++i) {
        if (t.node(i).is_binary)
            seq.codes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(
                ops.binary[rng.bounded(ops.binary.size())]);
        else
            seq.codes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(
                ops.unary[rng.bounded(ops.unary.size())]);
    }
    return seq;
}

inline std::vector<double> random_point(int dim, RandomStream& rng, double lo = -1.0,
                                        double hi = 1.0) {
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (auto& v : x) v = rng.uniform(lo, hi);
    return x;
}

inline OperatorSequence sequence_from_names(const TreeTemplate& t,
                                            const std::vector<std::string>& names) {
    OperatorSequence seq;
    seq.codes.resize(static_cast<std::size_t>(t.size()));
    for (int i = 0; i < t.size(); ++i) {
        if (t.node(i).is_binary)
            seq.codes[static_cast<std::size_t>(i)] =
                static_cast<std::uint8_t>(*binary_op_from_name(names[static_cast<std::size_t>(i)]));
        else
            seq.codes[static_cast<std::size_t>(i)] =
                static_cast<std::uint8_t>(*unary_op_from_name(names[static_cast<std::size_t>(i)]));
    }
    return seq;
}

}  // namespace xpde::test

#endif
