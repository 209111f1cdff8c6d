#include "xpde/eigen_iter.hpp"

#include <algorithm>
#include <cmath>

#include "xpde/errors.hpp"

namespace xpde {

namespace {

enum StreamTag : std::uint64_t {
    TagInitialSearch = 11,
    TagStepSearch = 12,
    TagRayleigh = 13,
};

std::vector<int> all_coords(int dim) {
    std::vector<int> cs(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) cs[static_cast<std::size_t>(i)] = i;
    return cs;
}

}  // namespace

double simplified_eigen_functional(const Expression& v, double gamma,
                                   const SampleBatch& interior) {
    PDEProblem prob = eigen_simplified_problem(v.tmpl().input_dim(), gamma);
    auto graph = std::make_shared<SymGraph>();
    NodeId root = v.build_graph(*graph);
    Functional f = prob.build_functional(graph, root, v.tmpl().param_count());
    FunctionalEvaluator eval(std::move(f));
    BatchSet set;
    set[BatchKind::Interior] = interior;
    return eval.value(v.params(), set);
}

double rayleigh_of_exp(const Expression& v, const SampleBatch& interior) {
    const int dim = v.tmpl().input_dim();

    // Shift v by its batch maximum so exp stays bounded; the quotient is
    // invariant under the shift.
    double vmax = -std::numeric_limits<double>::infinity();
    std::vector<double> pt(static_cast<std::size_t>(dim));
    for (std::size_t j = 0; j < interior.n; ++j) {
        interior.point(j, pt);
        vmax = std::max(vmax, v.evaluate(pt));
    }

    auto graph = std::make_shared<SymGraph>();
    NodeId root = v.build_graph(*graph);
    NodeId u = graph->exp(graph->sub(root, graph->constant(vmax)));
    const std::vector<int> cs = all_coords(dim);
    NodeId w = norm_sq_node(*graph, cs);
    return rayleigh_quotient(graph, u, w, cs, interior, v.params(), v.tmpl().param_count());
}

std::pair<double, SearchResult> initial_gamma(const PDEProblem& eigen_problem,
                                              const SearchConfig& config,
                                              std::size_t rayleigh_batch) {
    SearchConfig c = config;
    c.seed = RandomStream(config.seed).child(TagInitialSearch).origin_seed();
    SearchResult r = search_fixed_tree(eigen_problem, c);
    if (!r.found) throw ConfigError("initial_gamma: search produced no candidate");

    RandomStream rng = RandomStream(config.seed).child(TagRayleigh, 0);
    SampleBatch batch = sample_interior(eigen_problem.domain, rayleigh_batch, rng);

    const Expression& u = *r.best;
    auto graph = std::make_shared<SymGraph>();
    NodeId root = u.build_graph(*graph);
    const std::vector<int> cs = all_coords(eigen_problem.dim);
    NodeId w = norm_sq_node(*graph, cs);
    const double gamma =
        rayleigh_quotient(graph, root, w, cs, batch, u.params(), u.tmpl().param_count());
    return {gamma, std::move(r)};
}

EigenSolveResult iterate_eigenpair(const PDEProblem& eigen_problem, const SearchConfig& config,
                                   const EigenIterConfig& iter) {
    if (iter.G < 1) throw ConfigError("iterate_eigenpair: G must be >= 1");
    EigenSolveResult out;

    auto [gamma0, init_search] = initial_gamma(eigen_problem, config, iter.rayleigh_batch);
    out.gamma_trajectory.push_back(gamma0);
    out.searches.push_back(std::move(init_search));

    double gamma = gamma0;
    for (int i = 0; i < iter.G; ++i) {
        PDEProblem step_problem = eigen_simplified_problem(eigen_problem.dim, gamma);
        SearchConfig c = config;
        c.seed = RandomStream(config.seed)
                     .child(TagStepSearch, static_cast<std::uint64_t>(i))
                     .origin_seed();
        SearchResult r = search_fixed_tree(step_problem, c);
        if (!r.found) throw ConfigError("iterate_eigenpair: search produced no candidate");

        RandomStream rng = RandomStream(config.seed).child(TagRayleigh, static_cast<std::uint64_t>(i) + 1);
        SampleBatch batch = sample_interior(eigen_problem.domain, iter.rayleigh_batch, rng);
        gamma = rayleigh_of_exp(*r.best, batch);
        if (!std::isfinite(gamma)) throw NonFiniteError("iterate_eigenpair: non-finite eigenvalue");
        out.gamma_trajectory.push_back(gamma);
        out.final_v = r.best;
        out.searches.push_back(std::move(r));
    }

    out.final_gamma = gamma;
    out.found = true;
    out.final_expression = "exp(" + out.final_v->to_string() + ")";
    return out;
}

}  // namespace xpde
