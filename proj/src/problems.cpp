#include "xpde/problems.hpp"

#include <cmath>
#include <numbers>

#include "xpde/errors.hpp"

namespace xpde {

namespace {

constexpr std::uint64_t kConstraintSeed = 0x7ab1e5eedULL;

// exp((1/d) Σ cos x_i) / 3 over the given coordinates.
NodeId schrodinger_truth_node(SymGraph& g, std::span<const int> coords) {
    const double inv_d = 1.0 / static_cast<double>(coords.size());
    NodeId s = g.zero();
    for (int c : coords) s = g.add(s, g.cos(g.coord(c)));
    return g.mul(g.constant(1.0 / 3.0), g.exp(g.mul(g.constant(inv_d), s)));
}

// V(x) = -(1/9) exp((2/d) Σ cos x_i) + Σ (sin^2 x_i / d^2 - cos x_i / d).
NodeId schrodinger_potential_node(SymGraph& g, std::span<const int> coords) {
    const double d = static_cast<double>(coords.size());
    NodeId cos_sum = g.zero();
    NodeId trig_sum = g.zero();
    for (int c : coords) {
        cos_sum = g.add(cos_sum, g.cos(g.coord(c)));
        NodeId s = g.sin(g.coord(c));
        trig_sum = g.add(trig_sum, g.sub(g.mul(g.constant(1.0 / (d * d)), g.mul(s, s)),
                                         g.mul(g.constant(1.0 / d), g.cos(g.coord(c)))));
    }
    NodeId e = g.exp(g.mul(g.constant(2.0 / d), cos_sum));
    return g.add(g.mul(g.constant(-1.0 / 9.0), e), trig_sum);
}

double estimate_schrodinger_constant(int dim) {
    RandomStream rng(kConstraintSeed + static_cast<std::uint64_t>(dim));
    const std::size_t n = 1000000;
    const double inv_d = 1.0 / static_cast<double>(dim);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (int c = 0; c < dim; ++c) s += std::cos(rng.uniform(-1.0, 1.0));
        sum += std::exp(inv_d * s) / 3.0;
    }
    const double volume = std::pow(2.0, dim);
    return volume * sum / static_cast<double>(n);
}

}  // namespace

NodeId norm_sq_node(SymGraph& g, std::span<const int> coords) {
    NodeId acc = g.zero();
    for (int c : coords) acc = g.add(acc, g.pow_int(g.coord(c), 2));
    return acc;
}

std::vector<int> PDEProblem::space_coords() const {
    std::vector<int> cs;
    const int first = timed() ? 1 : 0;
    for (int c = first; c < n_coords(); ++c) cs.push_back(c);
    return cs;
}

bool PDEProblem::has_true_solution() const {
    return kind == ProblemKind::Poisson || kind == ProblemKind::Conservation ||
           kind == ProblemKind::Schrodinger;
}

NodeId PDEProblem::true_solution_node(SymGraph& g) const {
    const std::vector<int> cs = space_coords();
    switch (kind) {
        case ProblemKind::Poisson: {
            NodeId acc = g.zero();
            for (int c : cs) acc = g.add(acc, g.mul(g.constant(0.5), g.pow_int(g.coord(c), 2)));
            return acc;
        }
        case ProblemKind::Conservation: {
            NodeId s = g.zero();
            for (int c : cs) s = g.add(s, g.coord(c));
            return g.sin(g.add(g.coord(0), g.mul(g.constant(std::numbers::pi / 4.0), s)));
        }
        case ProblemKind::Schrodinger:
            return schrodinger_truth_node(g, cs);
        default:
            throw ConfigError("problem '" + name + "' has no closed-form solution");
    }
}

double PDEProblem::true_solution(std::span<const double> point) const {
    SymGraph g;
    NodeId n = true_solution_node(g);
    return g.eval(n, point, {});
}

Functional PDEProblem::build_functional(std::shared_ptr<SymGraph> graph, NodeId u,
                                        int n_params) const {
    SymGraph& g = *graph;
    const std::vector<int> cs = space_coords();
    Functional f;
    f.graph = graph;
    f.n_params = n_params;

    switch (kind) {
        case ProblemKind::Poisson: {
            NodeId lap = g.laplacian(u, cs);
            NodeId residual = g.add(g.neg(lap), g.constant(static_cast<double>(dim)));
            NodeId boundary = g.sub(u, true_solution_node(g));
            f.terms = {{BatchKind::Interior, g.pow_int(residual, 2)},
                       {BatchKind::Boundary, g.pow_int(boundary, 2)}};
            f.combine = Combine::linear({1.0, lambda});
            return f;
        }
        case ProblemKind::Conservation: {
            NodeId ut = g.diff(u, 0);
            NodeId sum_ux = g.zero();
            for (int c : cs) sum_ux = g.add(sum_ux, g.diff(u, c));
            NodeId scaled_ut =
                scaled_time_derivative
                    ? g.mul(g.constant(std::numbers::pi * static_cast<double>(dim) / 4.0), ut)
                    : ut;
            NodeId residual = g.sub(scaled_ut, sum_ux);
            NodeId s = g.zero();
            for (int c : cs) s = g.add(s, g.coord(c));
            NodeId init_data = g.sin(g.mul(g.constant(std::numbers::pi / 4.0), s));
            NodeId init_residual = g.sub(u, init_data);
            f.terms = {{BatchKind::Interior, g.pow_int(residual, 2)},
                       {BatchKind::Initial, g.pow_int(init_residual, 2)}};
            f.combine = Combine::linear({1.0, lambda});
            return f;
        }
        case ProblemKind::Schrodinger: {
            NodeId lap = g.laplacian(u, cs);
            NodeId V = schrodinger_potential_node(g, cs);
            NodeId residual = g.add(g.add(g.neg(lap), g.pow_int(u, 3)), g.mul(V, u));
            f.terms = {{BatchKind::Interior, g.pow_int(residual, 2)},
                       {BatchKind::Constraint, u}};
            f.combine = Combine::integral_constraint(lambda, integral_target);
            return f;
        }
        case ProblemKind::Eigen: {
            NodeId u2 = g.pow_int(u, 2);
            NodeId w = norm_sq_node(g, cs);
            f.terms = {{BatchKind::Interior, g.grad_norm_sq(u, cs)},
                       {BatchKind::Interior, g.mul(w, u2)},
                       {BatchKind::Interior, u2},
                       {BatchKind::Boundary, u2}};
            f.combine = Combine::rayleigh_constrained(lambda1, lambda2);
            return f;
        }
        case ProblemKind::EigenSimplified: {
            NodeId lap = g.laplacian(u, cs);
            NodeId residual = g.sub(g.add(g.sub(g.neg(lap), g.grad_norm_sq(u, cs)),
                                          norm_sq_node(g, cs)),
                                    g.constant(gamma));
            f.terms = {{BatchKind::Interior, g.pow_int(residual, 2)}};
            f.combine = Combine::linear({1.0});
            return f;
        }
    }
    throw ConfigError("unknown problem kind");
}

BatchSet PDEProblem::sample(const std::array<std::size_t, kNumBatchKinds>& sizes,
                            RandomStream& rng) const {
    BatchSet set;
    if (sizes[0] > 0) set[BatchKind::Interior] = sample_interior(domain, sizes[0], rng);
    if (sizes[1] > 0) set[BatchKind::Boundary] = sample_boundary(domain, sizes[1], rng);
    if (sizes[2] > 0) set[BatchKind::Initial] = sample_initial_slice(domain, sizes[2], rng);
    if (sizes[3] > 0) set[BatchKind::Constraint] = sample_interior(domain, sizes[3], rng);
    return set;
}

PDEProblem poisson_problem(int dim, double lambda) {
    PDEProblem p;
    p.kind = ProblemKind::Poisson;
    p.name = "poisson";
    p.dim = dim;
    p.domain = DomainSpec::hypercube(dim, -1.0, 1.0);
    p.default_batches = {5000, 1000, 0, 0};
    p.lambda = lambda;
    return p;
}

PDEProblem conservation_problem(int dim, double lambda, bool scaled_time_derivative) {
    PDEProblem p;
    p.kind = ProblemKind::Conservation;
    p.name = "conservation";
    p.dim = dim;
    p.domain = DomainSpec::timed_hypercube(dim, 0.0, 1.0, -1.0, 1.0);
    p.default_batches = {5000, 0, 1000, 0};
    p.lambda = lambda;
    p.scaled_time_derivative = scaled_time_derivative;
    return p;
}

PDEProblem schrodinger_problem(int dim, double lambda) {
    PDEProblem p;
    p.kind = ProblemKind::Schrodinger;
    p.name = "schrodinger";
    p.dim = dim;
    p.domain = DomainSpec::hypercube(dim, -1.0, 1.0);
    p.default_batches = {2000, 0, 0, 10000};
    p.lambda = lambda;
    p.integral_target = estimate_schrodinger_constant(dim);
    return p;
}

PDEProblem eigen_problem(int dim, double lambda1, double lambda2) {
    PDEProblem p;
    p.kind = ProblemKind::Eigen;
    p.name = "eigen";
    p.dim = dim;
    p.domain = DomainSpec::hypercube(dim, -3.0, 3.0);
    p.default_batches = {10000, 2000, 0, 0};
    p.lambda1 = lambda1;
    p.lambda2 = lambda2;
    return p;
}

PDEProblem eigen_simplified_problem(int dim, double gamma) {
    PDEProblem p;
    p.kind = ProblemKind::EigenSimplified;
    p.name = "eigen_simplified";
    p.dim = dim;
    p.domain = DomainSpec::hypercube(dim, -3.0, 3.0);
    p.default_batches = {10000, 0, 0, 0};
    p.gamma = gamma;
    return p;
}

PDEProblem problem_by_name(const std::string& name, int dim) {
    if (name == "poisson") return poisson_problem(dim);
    if (name == "conservation") return conservation_problem(dim);
    if (name == "schrodinger") return schrodinger_problem(dim);
    if (name == "eigen") return eigen_problem(dim);
    throw ConfigError("unknown problem '" + name +
                      "' (valid: poisson, conservation, schrodinger, eigen)");
}

Functional least_squares_functional(std::shared_ptr<SymGraph> g, NodeId interior_residual,
                                    NodeId boundary_residual, double lambda, int n_params) {
    Functional f;
    f.graph = g;
    f.terms = {{BatchKind::Interior, g->pow_int(interior_residual, 2)},
               {BatchKind::Boundary, g->pow_int(boundary_residual, 2)}};
    f.combine = Combine::linear({1.0, lambda});
    f.n_params = n_params;
    return f;
}

Functional variational_functional(std::shared_ptr<SymGraph> g, NodeId u, NodeId c, NodeId f_node,
                                  double lambda, std::span<const int> coords, int n_params) {
    Functional f;
    f.graph = g;
    NodeId u2 = g->pow_int(u, 2);
    NodeId energy = g->grad_norm_sq(u, coords);
    if (c != kNoNode) energy = g->add(energy, g->mul(c, u2));
    f.terms = {{BatchKind::Interior, energy},
               {BatchKind::Interior, g->mul(f_node, u)},
               {BatchKind::Boundary, u2}};
    f.combine = Combine::linear({0.5, -1.0, lambda});
    f.n_params = n_params;
    return f;
}

double rayleigh_quotient(std::shared_ptr<SymGraph> g, NodeId u, NodeId w,
                         std::span<const int> coords, const SampleBatch& interior,
                         std::span<const double> params, int n_params) {
    Functional f;
    f.graph = g;
    NodeId u2 = g->pow_int(u, 2);
    f.terms = {{BatchKind::Interior, g->grad_norm_sq(u, coords)},
               {BatchKind::Interior, g->mul(w, u2)},
               {BatchKind::Interior, u2}};
    f.combine = Combine::rayleigh();
    f.n_params = n_params;
    FunctionalEvaluator eval(std::move(f));
    BatchSet set;
    set[BatchKind::Interior] = interior;
    return eval.value(params, set);
}

double relative_l2_error(const std::function<double(std::span<const double>)>& candidate,
                         const std::function<double(std::span<const double>)>& truth,
                         const SampleBatch& batch) {
    std::vector<double> pt(static_cast<std::size_t>(batch.dim));
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < batch.n; ++j) {
        batch.point(j, pt);
        const double c = candidate(pt);
        const double t = truth(pt);
        num += (c - t) * (c - t);
        den += t * t;
    }
    if (den / static_cast<double>(batch.n) < 1e-12)
        throw DegenerateDenominatorError("relative_l2_error: reference norm below 1e-12");
    const double e = std::sqrt(num / den);
    if (!std::isfinite(e)) throw NonFiniteError("relative_l2_error: non-finite");
    return e;
}

double relative_l2_error_nodes(std::shared_ptr<SymGraph> g, NodeId candidate, NodeId truth,
                               const SampleBatch& batch, std::span<const double> params,
                               int n_params) {
    Functional f;
    f.graph = g;
    NodeId diff = g->sub(candidate, truth);
    f.terms = {{BatchKind::Interior, g->mul(diff, diff)},
               {BatchKind::Interior, g->mul(truth, truth)}};
    f.combine = Combine::linear({1.0, 0.0});
    f.n_params = n_params;
    FunctionalEvaluator eval(std::move(f));
    BatchSet set;
    set[BatchKind::Interior] = batch;
    eval.value(params, set);
    const double num = eval.last_integrals()[0];
    const double den = eval.last_integrals()[1];
    if (den / batch.weight < 1e-12)
        throw DegenerateDenominatorError("relative_l2_error: reference norm below 1e-12");
    return std::sqrt(num / den);
}

double relative_l2_error_vs_truth(const PDEProblem& problem, const Expression& expr,
                                  const SampleBatch& batch) {
    auto g = std::make_shared<SymGraph>();
    NodeId cand = expr.build_graph(*g);
    NodeId truth = problem.true_solution_node(*g);
    return relative_l2_error_nodes(g, cand, truth, batch, expr.params(),
                                   static_cast<int>(expr.params().size()));
}

}  // namespace xpde
