#include "xpde/parse.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "xpde/errors.hpp"

namespace xpde {

namespace {

struct Parser {
    const std::string& text;
    std::size_t pos = 0;
    SymGraph& g;
    int input_dim;
    bool timed;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("expression text at position " + std::to_string(pos) + ": " + msg);
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }
    bool consume(char c) {
        if (peek() == c) {
            ++pos;
            return true;
        }
        return false;
    }

    NodeId parse_sum() {
        NodeId v = parse_term();
        for (;;) {
            if (consume('+'))
                v = g.add(v, parse_term());
            else if (consume('-'))
                v = g.sub(v, parse_term());
            else
                return v;
        }
    }

    NodeId parse_term() {
        NodeId v = parse_unary();
        for (;;) {
            if (consume('*'))
                v = g.mul(v, parse_unary());
            else if (consume('/'))
                v = g.div(v, parse_unary());
            else
                return v;
        }
    }

    NodeId parse_unary() {
        if (consume('-')) return g.neg(parse_unary());
        if (consume('+')) return parse_unary();
        return parse_power();
    }

    NodeId parse_power() {
        NodeId base = parse_atom();
        if (consume('^')) {
            skip_ws();
            int n = 0;
            auto [p, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), n);
            if (ec != std::errc{} || n < 0) fail("exponent must be a non-negative integer");
            pos = static_cast<std::size_t>(p - text.data());
            return g.pow_int(base, n);
        }
        return base;
    }

    NodeId parse_atom() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of input");
        const char c = text[pos];
        if (c == '(') {
            ++pos;
            NodeId v = parse_sum();
            if (!consume(')')) fail("expected ')'");
            return v;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_name();
        fail(std::string("unexpected character '") + c + "'");
    }

    NodeId parse_number() {
        double v = 0.0;
        auto [p, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), v);
        if (ec != std::errc{}) fail("bad numeric literal");
        pos = static_cast<std::size_t>(p - text.data());
        return g.constant(v);
    }

    NodeId parse_name() {
        std::size_t start = pos;
        while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) ||
                                     text[pos] == '_'))
            ++pos;
        const std::string name = text.substr(start, pos - start);
        if (name == "exp" || name == "sin" || name == "cos") {
            if (!consume('(')) fail("expected '(' after function name");
            NodeId arg = parse_sum();
            if (!consume(')')) fail("expected ')'");
            if (name == "exp") return g.exp(arg);
            if (name == "sin") return g.sin(arg);
            return g.cos(arg);
        }
        const int c = coord_of(name);
        if (c < 0) fail("unknown name '" + name + "'");
        return g.coord(c);
    }

    int coord_of(const std::string& name) const {
        if (timed && name == "t") return 0;
        if (name.size() >= 2 && name[0] == 'x') {
            int k = 0;
            auto [p, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
            if (ec == std::errc{} && p == name.data() + name.size() && k >= 1) {
                const int c = timed ? k : k - 1;
                if (c < input_dim) return c;
            }
        }
        return -1;
    }
};

}  // namespace

SymExpr parse_expression(const std::string& text, int input_dim, bool timed) {
    auto g = std::make_shared<SymGraph>();
    Parser p{text, 0, *g, input_dim, timed};
    NodeId root = p.parse_sum();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing characters");
    return SymExpr{std::move(g), root, input_dim};
}

int count_operators(const SymExpr& parsed) {
    return parsed.graph->count_operator_nodes(parsed.root);
}

}  // namespace xpde
