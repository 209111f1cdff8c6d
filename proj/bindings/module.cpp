#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xpde/config.hpp"
#include "xpde/eigen_iter.hpp"
#include "xpde/errors.hpp"
#include "xpde/parse.hpp"
#include "xpde/runner.hpp"

namespace py = pybind11;
using namespace xpde;

namespace {

std::vector<double> to_vector(const py::array_t<double>& a) {
    auto buf = a.request();
    const double* p = static_cast<const double*>(buf.ptr);
    return std::vector<double>(p, p + buf.size);
}

// points: (n, dim) array -> row-major flat vector
std::pair<std::vector<double>, std::size_t> to_points(const py::array_t<double>& pts, int dim) {
    auto buf = pts.request();
    if (buf.ndim != 2 || buf.shape[1] != dim)
        throw std::invalid_argument("points must have shape (n, input_dim)");
    const auto n = static_cast<std::size_t>(buf.shape[0]);
    auto r = pts.unchecked<2>();
    std::vector<double> flat(n * static_cast<std::size_t>(dim));
    for (std::size_t j = 0; j < n; ++j)
        for (int c = 0; c < dim; ++c)
            flat[j * static_cast<std::size_t>(dim) + static_cast<std::size_t>(c)] =
                r(static_cast<py::ssize_t>(j), c);
    return {std::move(flat), n};
}

OperatorSequence sequence_from_names(const TreeTemplate& tmpl,
                                     const std::vector<std::string>& names) {
    if (static_cast<int>(names.size()) != tmpl.size())
        throw ConfigError("operator list length != template size");
    OperatorSequence seq;
    seq.codes.resize(names.size());
    for (int i = 0; i < tmpl.size(); ++i) {
        if (tmpl.node(i).is_binary) {
            auto op = binary_op_from_name(names[static_cast<std::size_t>(i)]);
            if (!op) throw ConfigError("unknown binary operator '" + names[static_cast<std::size_t>(i)] + "'");
            seq.codes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(*op);
        } else {
            auto op = unary_op_from_name(names[static_cast<std::size_t>(i)]);
            if (!op) throw ConfigError("unknown unary operator '" + names[static_cast<std::size_t>(i)] + "'");
            seq.codes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(*op);
        }
    }
    return seq;
}

SearchConfig config_from_dict(const py::dict& d) {
    SearchConfig c;
    for (auto item : d) {
        const std::string key = py::cast<std::string>(item.first);
        if (key == "T") c.T = py::cast<int>(item.second);
        else if (key == "N") c.N = py::cast<int>(item.second);
        else if (key == "K") c.K = py::cast<int>(item.second);
        else if (key == "T1") c.T1 = py::cast<int>(item.second);
        else if (key == "T2") c.T2 = py::cast<int>(item.second);
        else if (key == "T3") c.T3 = py::cast<int>(item.second);
        else if (key == "epsilon") c.epsilon = py::cast<double>(item.second);
        else if (key == "nu") c.nu = py::cast<double>(item.second);
        else if (key == "risk_seeking") c.risk_seeking = py::cast<bool>(item.second);
        else if (key == "seed") c.seed = py::cast<std::uint64_t>(item.second);
        else if (key == "threads") c.threads = py::cast<int>(item.second);
        else if (key == "template") c.template_shape = resolve_template_shape(py::cast<std::string>(item.second));
        else if (key == "metric_batch") c.metric_batch = py::cast<std::size_t>(item.second);
        else if (key == "batch_interior") c.batch_sizes[0] = py::cast<std::size_t>(item.second);
        else if (key == "batch_boundary") c.batch_sizes[1] = py::cast<std::size_t>(item.second);
        else if (key == "batch_initial") c.batch_sizes[2] = py::cast<std::size_t>(item.second);
        else if (key == "batch_constraint") c.batch_sizes[3] = py::cast<std::size_t>(item.second);
        else if (key == "unary_ops") {
            c.op_set.unary.clear();
            for (auto name : py::cast<py::list>(item.second)) {
                auto op = unary_op_from_name(py::cast<std::string>(name));
                if (!op) throw ConfigError("unknown unary operator");
                c.op_set.unary.push_back(*op);
            }
        } else if (key == "binary_ops") {
            c.op_set.binary.clear();
            for (auto name : py::cast<py::list>(item.second)) {
                auto op = binary_op_from_name(py::cast<std::string>(name));
                if (!op) throw ConfigError("unknown binary operator");
                c.op_set.binary.push_back(*op);
            }
        } else {
            throw ConfigError("unknown search option '" + key + "'");
        }
    }
    return c;
}

py::dict search_result_to_dict(const SearchResult& r) {
    py::dict out;
    out["found"] = r.found;
    if (r.found) {
        out["expression"] = r.best->to_string();
        out["final_loss"] = r.best_loss;
        if (r.rel_l2) out["relative_l2_error"] = *r.rel_l2;
    }
    py::list pool;
    for (const auto& e : r.pool_results) {
        py::dict entry;
        entry["ops"] = e.ops;
        entry["score"] = e.score;
        entry["finetuned_loss"] = e.loss;
        entry["expression"] = e.expression;
        pool.append(entry);
    }
    out["pool"] = pool;
    py::list scores_per_iter;
    for (const auto& it : r.iterations) scores_per_iter.append(it.scores);
    out["iteration_scores"] = scores_per_iter;
    out["seconds"] = r.seconds;
    return out;
}

}  // namespace

PYBIND11_MODULE(_xpde, m) {
    m.doc() = "expression-search PDE solver";

    py::register_exception<NonFiniteError>(m, "NonFiniteError");
    py::register_exception<DegenerateDenominatorError>(m, "DegenerateDenominatorError");
    py::register_exception<ConfigError>(m, "ConfigurationError");

    py::class_<TreeTemplate, std::shared_ptr<TreeTemplate>>(m, "TreeTemplate")
        .def(py::init<const std::string&, int, bool>(), py::arg("shape"), py::arg("input_dim"),
             py::arg("timed") = false)
        .def_static("depth", &TreeTemplate::depth, py::arg("k"), py::arg("input_dim"),
                    py::arg("timed") = false)
        .def_property_readonly("size", &TreeTemplate::size)
        .def_property_readonly("input_dim", &TreeTemplate::input_dim)
        .def_property_readonly("param_count", &TreeTemplate::param_count)
        .def_property_readonly("shape", &TreeTemplate::shape)
        .def("__repr__", [](const TreeTemplate& t) {
            return "TreeTemplate('" + t.shape() + "', dim=" + std::to_string(t.input_dim()) + ")";
        });

    py::class_<Expression>(m, "Expression")
        .def(py::init([](TreeTemplatePtr tmpl, const std::vector<std::string>& ops,
                         const py::array_t<double>& params) {
                 return Expression(tmpl, sequence_from_names(*tmpl, ops), to_vector(params));
             }),
             py::arg("template"), py::arg("operators"), py::arg("params"))
        .def_property_readonly("params",
                               [](const Expression& e) { return e.params(); })
        .def("with_params",
             [](const Expression& e, const py::array_t<double>& p) {
                 return e.with_params(to_vector(p));
             })
        .def("__call__",
             [](const Expression& e, const py::array_t<double>& pts) {
                 auto [flat, n] = to_points(pts, e.tmpl().input_dim());
                 std::vector<double> vals = e.evaluate_batch(flat, n);
                 return py::array_t<double>(static_cast<py::ssize_t>(n), vals.data());
             })
        .def("to_string", &Expression::to_string)
        .def("count_operators", &Expression::count_operators)
        .def("derivative",
             [](const Expression& e, int coord, const py::array_t<double>& pts) {
                 auto [flat, n] = to_points(pts, e.tmpl().input_dim());
                 SymExpr sym = to_sym_expr(e);
                 SymExpr d = sym.diff(coord);
                 py::array_t<double> out(static_cast<py::ssize_t>(n));
                 double* o = out.mutable_data();
                 const std::size_t dim = static_cast<std::size_t>(e.tmpl().input_dim());
                 for (std::size_t j = 0; j < n; ++j)
                     o[j] = d.eval(std::span<const double>(flat.data() + j * dim, dim), e.params());
                 return out;
             },
             py::arg("coord"), py::arg("points"))
        .def("laplacian",
             [](const Expression& e, const py::array_t<double>& pts) {
                 auto [flat, n] = to_points(pts, e.tmpl().input_dim());
                 SymExpr sym = to_sym_expr(e);
                 std::vector<int> cs(static_cast<std::size_t>(e.tmpl().input_dim()));
                 for (std::size_t i = 0; i < cs.size(); ++i) cs[i] = static_cast<int>(i);
                 NodeId lap = sym.graph->laplacian(sym.root, cs);
                 py::array_t<double> out(static_cast<py::ssize_t>(n));
                 double* o = out.mutable_data();
                 const std::size_t dim = static_cast<std::size_t>(e.tmpl().input_dim());
                 for (std::size_t j = 0; j < n; ++j)
                     o[j] = sym.graph->eval(
                         lap, std::span<const double>(flat.data() + j * dim, dim), e.params());
                 return out;
             },
             py::arg("points"))
        .def("__repr__", [](const Expression& e) { return "Expression(" + e.to_string() + ")"; });

    m.def("random_params",
          [](const TreeTemplatePtr& tmpl, std::uint64_t seed) {
              RandomStream rng(seed);
              return random_params(*tmpl, rng);
          },
          py::arg("template"), py::arg("seed"));

    m.def("parse",
          [](const std::string& text, int input_dim, bool timed) {
              auto parsed = parse_expression(text, input_dim, timed);
              return py::cpp_function([parsed, input_dim](const py::array_t<double>& pts) {
                  auto [flat, n] = to_points(pts, input_dim);
                  std::vector<double> vals(n);
                  const auto dim = static_cast<std::size_t>(input_dim);
                  for (std::size_t j = 0; j < n; ++j)
                      vals[j] = parsed.eval(
                          std::span<const double>(flat.data() + j * dim, dim), {});
                  return py::array_t<double>(static_cast<py::ssize_t>(n), vals.data());
              });
          },
          py::arg("text"), py::arg("input_dim"), py::arg("timed") = false,
          "Parses expression text and returns a batch evaluator callable.");

    m.def("count_operators",
          [](const std::string& text, int input_dim, bool timed) {
              return count_operators(parse_expression(text, input_dim, timed));
          },
          py::arg("text"), py::arg("input_dim"), py::arg("timed") = false);

    m.def("functional_value",
          [](const std::string& problem, int dim, const Expression& expr, std::uint64_t seed) {
              PDEProblem prob = problem_by_name(problem, dim);
              auto graph = std::make_shared<SymGraph>();
              NodeId u = expr.build_graph(*graph);
              Functional f = prob.build_functional(graph, u, expr.tmpl().param_count());
              FunctionalEvaluator eval(std::move(f));
              RandomStream rng(seed);
              BatchSet batches = prob.sample(prob.default_batches, rng);
              return eval.value(expr.params(), batches);
          },
          py::arg("problem"), py::arg("dim"), py::arg("expression"), py::arg("seed") = 0);

    m.def("score_expression",
          [](const std::string& problem, int dim, const std::string& text, std::uint64_t seed) {
              ExperimentSpec spec = profile_defaults("desk");
              spec.problem = problem;
              spec.dims = {dim};
              spec.search.seed = seed;
              ExpressionScore s = score_expression_text(spec, dim, text);
              py::dict out;
              out["functional"] = s.loss;
              out["score"] = s.score;
              if (s.rel_l2) out["relative_l2_error"] = *s.rel_l2;
              return out;
          },
          py::arg("problem"), py::arg("dim"), py::arg("expression"), py::arg("seed") = 0);

    m.def("compute_score",
          [](const std::string& problem, int dim, const TreeTemplatePtr& tmpl,
             const std::vector<std::string>& ops, const py::dict& options, std::uint64_t seed) {
              PDEProblem prob = problem_by_name(problem, dim);
              SearchConfig config = config_from_dict(options);
              RandomStream rng(seed);
              ScoredCandidate sc =
                  compute_score(tmpl, sequence_from_names(*tmpl, ops), prob, config, rng);
              py::dict out;
              out["score"] = sc.score;
              out["loss"] = sc.loss;
              out["params"] = sc.params;
              return out;
          },
          py::arg("problem"), py::arg("dim"), py::arg("template"), py::arg("operators"),
          py::arg("options") = py::dict(), py::arg("seed") = 0);

    m.def("search",
          [](const std::string& problem, int dim, const py::dict& options) {
              PDEProblem prob = problem_by_name(problem, dim);
              SearchConfig config = config_from_dict(options);
              return search_result_to_dict(search_fixed_tree(prob, config));
          },
          py::arg("problem"), py::arg("dim"), py::arg("options") = py::dict(),
          "Runs the fixed-tree searching loop and returns the report as a dict.");

    m.def("solve_eigenpair",
          [](int dim, const py::dict& options, int G, std::size_t rayleigh_batch) {
              PDEProblem prob = eigen_problem(dim);
              SearchConfig config = config_from_dict(options);
              EigenIterConfig iter;
              iter.G = G;
              iter.rayleigh_batch = rayleigh_batch;
              EigenSolveResult r = iterate_eigenpair(prob, config, iter);
              py::dict out;
              out["gamma"] = r.final_gamma;
              out["gamma_trajectory"] = r.gamma_trajectory;
              out["expression"] = r.final_expression;
              return out;
          },
          py::arg("dim"), py::arg("options") = py::dict(), py::arg("G") = 10,
          py::arg("rayleigh_batch") = 100000);

    m.def("relative_l2_error",
          [](const std::string& problem, int dim, const Expression& expr, std::size_t batch,
             std::uint64_t seed) {
              PDEProblem prob = problem_by_name(problem, dim);
              RandomStream rng(seed);
              SampleBatch metric = sample_interior(prob.domain, batch, rng);
              return relative_l2_error_vs_truth(prob, expr, metric);
          },
          py::arg("problem"), py::arg("dim"), py::arg("expression"), py::arg("batch") = 100000,
          py::arg("seed") = 0);
}
