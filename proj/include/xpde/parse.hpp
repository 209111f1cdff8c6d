#ifndef XPDE_PARSE_HPP
#define XPDE_PARSE_HPP

#include <memory>
#include <string>

#include "xpde/expression.hpp"
#include "xpde/sym_graph.hpp"

namespace xpde {

// Parses infix expression text into a symbolic graph. The grammar covers
// operators + - * / ^ (integer exponents), function application exp/sin/cos,
// variables x1..xd (and t on timed domains), and decimal literals. Standard
// precedence: ^ binds tightest, then unary minus, then * /, then + -.
//
// `input_dim` and `timed` fix the variable-to-coordinate mapping: untimed
// maps xk to coordinate k-1; timed maps t to 0 and xk to k.
SymExpr parse_expression(const std::string& text, int input_dim, bool timed = false);

// Number of operator nodes in parsed text (operands, i.e. numbers and
// variables, do not count). Note this counts the rendered structure, not
// tree-template nodes: an Expression's own count_operators() counts one
// operator per template node.
int count_operators(const SymExpr& parsed);

}  // namespace xpde

#endif
