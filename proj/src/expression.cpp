#include "xpde/expression.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

#include "xpde/errors.hpp"

namespace xpde {

const char* name_of(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "add";
        case BinaryOp::Sub: return "sub";
        case BinaryOp::Mul: return "mul";
        case BinaryOp::Div: return "div";
    }
    return "?";
}

const char* name_of(UnaryOp op) {
    switch (op) {
        case UnaryOp::Const0: return "const0";
        case UnaryOp::Const1: return "const1";
        case UnaryOp::Identity: return "id";
        case UnaryOp::Square: return "square";
        case UnaryOp::Cube: return "cube";
        case UnaryOp::Quartic: return "quartic";
        case UnaryOp::Exp: return "exp";
        case UnaryOp::Sin: return "sin";
        case UnaryOp::Cos: return "cos";
    }
    return "?";
}

std::optional<BinaryOp> binary_op_from_name(const std::string& name) {
    if (name == "add" || name == "+") return BinaryOp::Add;
    if (name == "sub" || name == "-") return BinaryOp::Sub;
    if (name == "mul" || name == "*") return BinaryOp::Mul;
    if (name == "div" || name == "/") return BinaryOp::Div;
    return std::nullopt;
}

std::optional<UnaryOp> unary_op_from_name(const std::string& name) {
    if (name == "const0" || name == "0") return UnaryOp::Const0;
    if (name == "const1" || name == "1") return UnaryOp::Const1;
    if (name == "id" || name == "identity") return UnaryOp::Identity;
    if (name == "square") return UnaryOp::Square;
    if (name == "cube") return UnaryOp::Cube;
    if (name == "quartic") return UnaryOp::Quartic;
    if (name == "exp") return UnaryOp::Exp;
    if (name == "sin") return UnaryOp::Sin;
    if (name == "cos") return UnaryOp::Cos;
    return std::nullopt;
}

OperatorSet OperatorSet::defaults() {
    OperatorSet s;
    s.binary = {BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul};
    s.unary = {UnaryOp::Const0, UnaryOp::Const1, UnaryOp::Identity, UnaryOp::Square,
               UnaryOp::Cube,   UnaryOp::Quartic, UnaryOp::Exp,     UnaryOp::Sin,
               UnaryOp::Cos};
    return s;
}

void OperatorSet::validate() const {
    if (binary.empty() || unary.empty())
        throw ConfigError("operator set: both alphabets must be non-empty");
    std::set<BinaryOp> b(binary.begin(), binary.end());
    std::set<UnaryOp> u(unary.begin(), unary.end());
    if (b.size() != binary.size() || u.size() != unary.size())
        throw ConfigError("operator set: duplicate operators");
}

int OperatorSet::binary_index(BinaryOp op) const {
    auto it = std::find(binary.begin(), binary.end(), op);
    return it == binary.end() ? -1 : static_cast<int>(it - binary.begin());
}

int OperatorSet::unary_index(UnaryOp op) const {
    auto it = std::find(unary.begin(), unary.end(), op);
    return it == unary.end() ? -1 : static_cast<int>(it - unary.begin());
}

namespace {

// Recursive descent over the shape notation: u | u(child) | b(child,child).
struct ShapeParser {
    const std::string& s;
    std::size_t pos = 0;

    explicit ShapeParser(const std::string& str) : s(str) {}

    [[noreturn]] void fail(const std::string& msg) {
        throw ConfigError("template shape '" + s + "': " + msg);
    }
    char peek() { return pos < s.size() ? s[pos] : '\0'; }
    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos;
    }

    int parse_node(std::vector<TemplateNode>& nodes) {
        while (peek() == ' ') ++pos;
        const char kind = peek();
        if (kind != 'u' && kind != 'b') fail("expected 'u' or 'b'");
        ++pos;
        const int id = static_cast<int>(nodes.size());
        nodes.push_back(TemplateNode{});
        if (kind == 'b') {
            nodes[static_cast<std::size_t>(id)].is_binary = true;
            expect('(');
            const int l = parse_node(nodes);
            expect(',');
            const int r = parse_node(nodes);
            expect(')');
            nodes[static_cast<std::size_t>(id)].left = l;
            nodes[static_cast<std::size_t>(id)].right = r;
        } else if (peek() == '(') {
            ++pos;
            const int c = parse_node(nodes);
            expect(')');
            nodes[static_cast<std::size_t>(id)].left = c;
        } else {
            nodes[static_cast<std::size_t>(id)].is_leaf = true;
        }
        return id;
    }
};

}  // namespace

TreeTemplate::TreeTemplate(const std::string& shape, int input_dim, bool timed)
    : input_dim_(input_dim), timed_(timed), shape_(shape) {
    if (input_dim < 1) throw ConfigError("template: input_dim must be >= 1");
    ShapeParser parser(shape);
    const int root = parser.parse_node(nodes_);
    while (parser.peek() == ' ') ++parser.pos;
    if (parser.pos != shape.size()) parser.fail("trailing characters");
    if (root != 0) parser.fail("root must come first");

    param_offset_.assign(nodes_.size(), -1);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const TemplateNode& n = nodes_[i];
        if (n.is_binary) {
            ++n_binary_;
        } else {
            ++n_unary_;
            if (n.is_leaf) ++n_leaves_;
            param_offset_[i] = param_count_;
            param_count_ += n.is_leaf ? input_dim_ + 1 : 2;
        }
    }
}

std::string TreeTemplate::shape_for_depth(int k) {
    if (k < 3) throw ConfigError("template depth must be >= 3");
    std::string s = "u(b(u,u))";
    for (int i = 3; i < k; ++i) s = "u(b(" + s + ",u))";
    return s;
}

TreeTemplate TreeTemplate::depth3(int input_dim, bool timed) {
    return TreeTemplate(shape_for_depth(3), input_dim, timed);
}

TreeTemplate TreeTemplate::depth(int k, int input_dim, bool timed) {
    return TreeTemplate(shape_for_depth(k), input_dim, timed);
}

int TreeTemplate::node_param_len(int node) const {
    const TemplateNode& n = nodes_[static_cast<std::size_t>(node)];
    if (n.is_binary) return 0;
    return n.is_leaf ? input_dim_ + 1 : 2;
}

std::string TreeTemplate::coord_name(int c) const {
    if (timed_) return c == 0 ? "t" : "x" + std::to_string(c);
    return "x" + std::to_string(c + 1);
}

int TreeTemplate::coord_index(const std::string& name) const {
    if (timed_ && name == "t") return 0;
    if (name.size() >= 2 && name[0] == 'x') {
        int k = 0;
        auto [p, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
        if (ec != std::errc{} || p != name.data() + name.size()) return -1;
        const int c = timed_ ? k : k - 1;
        if (k >= 1 && c < input_dim_) return c;
    }
    return -1;
}

std::string OperatorSequence::to_string(const TreeTemplate& tmpl) const {
    std::string out;
    for (int i = 0; i < tmpl.size(); ++i) {
        if (i) out += ",";
        out += tmpl.node(i).is_binary ? name_of(binary_at(i)) : name_of(unary_at(i));
    }
    return out;
}

Expression::Expression(TreeTemplatePtr tmpl, OperatorSequence ops, std::vector<double> params)
    : tmpl_(std::move(tmpl)), ops_(std::move(ops)), params_(std::move(params)) {
    if (static_cast<int>(ops_.codes.size()) != tmpl_->size())
        throw ConfigError("expression: operator sequence length != template size");
    if (static_cast<int>(params_.size()) != tmpl_->param_count())
        throw ConfigError("expression: parameter vector length != template layout");
    for (double v : params_)
        if (!std::isfinite(v)) throw NonFiniteError("expression: non-finite parameter");
}

Expression Expression::with_params(std::vector<double> params) const {
    return Expression(tmpl_, ops_, std::move(params));
}

namespace {

double apply_unary(UnaryOp op, double x) {
    switch (op) {
        case UnaryOp::Const0: return 0.0;
        case UnaryOp::Const1: return 1.0;
        case UnaryOp::Identity: return x;
        case UnaryOp::Square: return x * x;
        case UnaryOp::Cube: return x * x * x;
        case UnaryOp::Quartic: return (x * x) * (x * x);
        case UnaryOp::Exp: return std::exp(x);
        case UnaryOp::Sin: return std::sin(x);
        case UnaryOp::Cos: return std::cos(x);
    }
    return 0.0;
}

}  // namespace

double Expression::evaluate(std::span<const double> point) const {
    const TreeTemplate& t = *tmpl_;
    const int d = t.input_dim();
    if (static_cast<int>(point.size()) != d)
        throw std::invalid_argument("evaluate: point dimension mismatch");

    // Children have larger pre-order ids than parents, so a reverse sweep
    // visits children first.
    std::vector<double> val(static_cast<std::size_t>(t.size()));
    for (int i = t.size() - 1; i >= 0; --i) {
        const TemplateNode& n = t.node(i);
        double v;
        if (n.is_binary) {
            const double l = val[static_cast<std::size_t>(n.left)];
            const double r = val[static_cast<std::size_t>(n.right)];
            switch (ops_.binary_at(i)) {
                case BinaryOp::Add: v = l + r; break;
                case BinaryOp::Sub: v = l - r; break;
                case BinaryOp::Mul: v = l * r; break;
                case BinaryOp::Div:
                    if (std::abs(r) < SymGraph::kDivGuard)
                        throw NonFiniteError("evaluate: denominator below guard");
                    v = l / r;
                    break;
                default: v = 0.0;
            }
        } else {
            const UnaryOp op = ops_.unary_at(i);
            const int off = t.param_offset(i);
            if (n.is_leaf) {
                double acc = 0.0;
                for (int c = 0; c < d; ++c)
                    acc += params_[static_cast<std::size_t>(off + c)] *
                           apply_unary(op, point[static_cast<std::size_t>(c)]);
                v = acc + params_[static_cast<std::size_t>(off + d)];
            } else {
                const double child = val[static_cast<std::size_t>(n.left)];
                v = params_[static_cast<std::size_t>(off)] * apply_unary(op, child) +
                    params_[static_cast<std::size_t>(off + 1)];
            }
        }
        if (!std::isfinite(v)) throw NonFiniteError("evaluate: non-finite intermediate");
        val[static_cast<std::size_t>(i)] = v;
    }
    return val[0];
}

std::vector<double> Expression::evaluate_batch(std::span<const double> points_rowmajor,
                                               std::size_t n) const {
    const std::size_t d = static_cast<std::size_t>(tmpl_->input_dim());
    if (points_rowmajor.size() != n * d)
        throw std::invalid_argument("evaluate_batch: size mismatch");
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j)
        out[j] = evaluate(points_rowmajor.subspan(j * d, d));
    return out;
}

namespace {

NodeId graph_unary(SymGraph& g, UnaryOp op, NodeId x) {
    switch (op) {
        case UnaryOp::Const0: return g.zero();
        case UnaryOp::Const1: return g.one();
        case UnaryOp::Identity: return x;
        case UnaryOp::Square: return g.pow_int(x, 2);
        case UnaryOp::Cube: return g.pow_int(x, 3);
        case UnaryOp::Quartic: return g.pow_int(x, 4);
        case UnaryOp::Exp: return g.exp(x);
        case UnaryOp::Sin: return g.sin(x);
        case UnaryOp::Cos: return g.cos(x);
    }
    return g.zero();
}

}  // namespace

NodeId Expression::build_graph(SymGraph& g) const {
    const TreeTemplate& t = *tmpl_;
    const int d = t.input_dim();
    std::vector<NodeId> built(static_cast<std::size_t>(t.size()), kNoNode);
    for (int i = t.size() - 1; i >= 0; --i) {
        const TemplateNode& n = t.node(i);
        NodeId v;
        if (n.is_binary) {
            const NodeId l = built[static_cast<std::size_t>(n.left)];
            const NodeId r = built[static_cast<std::size_t>(n.right)];
            switch (ops_.binary_at(i)) {
                case BinaryOp::Add: v = g.add(l, r); break;
                case BinaryOp::Sub: v = g.sub(l, r); break;
                case BinaryOp::Mul: v = g.mul(l, r); break;
                case BinaryOp::Div: v = g.div(l, r); break;
                default: v = g.zero();
            }
        } else {
            const UnaryOp op = ops_.unary_at(i);
            const int off = t.param_offset(i);
            if (n.is_leaf) {
                NodeId acc = g.zero();
                for (int c = 0; c < d; ++c)
                    acc = g.add(acc, g.mul(g.param(off + c), graph_unary(g, op, g.coord(c))));
                v = g.add(acc, g.param(off + d));
            } else {
                const NodeId child = built[static_cast<std::size_t>(n.left)];
                v = g.add(g.mul(g.param(off), graph_unary(g, op, child)), g.param(off + 1));
            }
        }
        built[static_cast<std::size_t>(i)] = v;
    }
    return built[0];
}

std::vector<double> random_params(const TreeTemplate& tmpl, RandomStream& rng) {
    std::vector<double> p(static_cast<std::size_t>(tmpl.param_count()));
    for (auto& v : p) v = rng.uniform(-1.0, 1.0);
    return p;
}

std::string format_number(double v) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, p);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

namespace {

const char* binary_symbol(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
    }
    return "?";
}

// Renders `alpha*term` where term is op applied to a bare variable.
std::string leaf_term(UnaryOp op, const std::string& var, double alpha) {
    std::string t;
    switch (op) {
        case UnaryOp::Identity: t = var; break;
        case UnaryOp::Square: t = var + "^2"; break;
        case UnaryOp::Cube: t = var + "^3"; break;
        case UnaryOp::Quartic: t = var + "^4"; break;
        case UnaryOp::Exp: t = "exp(" + var + ")"; break;
        case UnaryOp::Sin: t = "sin(" + var + ")"; break;
        case UnaryOp::Cos: t = "cos(" + var + ")"; break;
        default: t = "0.0"; break;
    }
    return format_number(alpha) + "*" + t;
}

std::string append_signed(std::string body, double value) {
    if (std::signbit(value)) {
        return body + "-" + format_number(-value);
    }
    return body + "+" + format_number(value);
}

struct Renderer {
    const TreeTemplate& t;
    const OperatorSequence& ops;
    const std::vector<double>& params;

    std::string render(int i) const {
        const TemplateNode& n = t.node(i);
        if (n.is_binary)
            return "(" + render(n.left) + ")" + binary_symbol(ops.binary_at(i)) + "(" +
                   render(n.right) + ")";
        const UnaryOp op = ops.unary_at(i);
        const int off = t.param_offset(i);
        if (n.is_leaf) {
            const int d = t.input_dim();
            const double beta = params[static_cast<std::size_t>(off + d)];
            // Constant leaves fold to a single number.
            if (op == UnaryOp::Const0) return format_number(beta);
            if (op == UnaryOp::Const1) {
                double v = beta;
                for (int c = 0; c < d; ++c) v += params[static_cast<std::size_t>(off + c)];
                return format_number(v);
            }
            std::string body;
            for (int c = 0; c < d; ++c) {
                const double a = params[static_cast<std::size_t>(off + c)];
                std::string term = leaf_term(op, t.coord_name(c), std::abs(a));
                if (c == 0)
                    body = (std::signbit(a) ? "-" : "") + term;
                else
                    body += (std::signbit(a) ? "-" : "+") + term;
            }
            return append_signed(body, beta);
        }
        const double alpha = params[static_cast<std::size_t>(off)];
        const double beta = params[static_cast<std::size_t>(off + 1)];
        if (op == UnaryOp::Const0) return format_number(beta);
        if (op == UnaryOp::Const1) return format_number(alpha + beta);
        const std::string child = render(n.left);
        std::string body;
        switch (op) {
            case UnaryOp::Identity: body = "(" + child + ")"; break;
            case UnaryOp::Square: body = "(" + child + ")^2"; break;
            case UnaryOp::Cube: body = "(" + child + ")^3"; break;
            case UnaryOp::Quartic: body = "(" + child + ")^4"; break;
            case UnaryOp::Exp: body = "exp(" + child + ")"; break;
            case UnaryOp::Sin: body = "sin(" + child + ")"; break;
            case UnaryOp::Cos: body = "cos(" + child + ")"; break;
            default: body = "0.0"; break;
        }
        return append_signed(format_number(alpha) + "*" + body, beta);
    }
};

}  // namespace

std::string Expression::to_string() const {
    Renderer r{*tmpl_, ops_, params_};
    return r.render(0);
}

SymExpr to_sym_expr(const Expression& expr) {
    auto g = std::make_shared<SymGraph>();
    NodeId root = expr.build_graph(*g);
    return SymExpr{std::move(g), root, expr.tmpl().input_dim()};
}

}  // namespace xpde
