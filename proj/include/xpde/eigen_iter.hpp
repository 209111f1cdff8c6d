#ifndef XPDE_EIGEN_ITER_HPP
#define XPDE_EIGEN_ITER_HPP

#include <optional>
#include <string>
#include <vector>

#include "xpde/search.hpp"

namespace xpde {

// Least-squares functional for the log-substituted eigenproblem:
// mean-square x volume of -Δv - |∇v|^2 + |x|^2 - γ over the interior.
double simplified_eigen_functional(const Expression& v, double gamma,
                                   const SampleBatch& interior);

// Rayleigh quotient of exp(v) with w = |x|^2. The integrands are shifted by
// max v over the batch before exponentiation; the quotient is exactly
// invariant under additive constants in v, so the shift only prevents
// overflow.
double rayleigh_of_exp(const Expression& v, const SampleBatch& interior);

struct EigenSolveResult {
    std::vector<double> gamma_trajectory;  // gamma_0 .. gamma_G
    double final_gamma = 0.0;
    std::optional<Expression> final_v;
    std::string final_expression;  // exp(<v>)
    bool found = false;
    std::vector<SearchResult> searches;
};

struct EigenIterConfig {
    int G = 10;
    std::size_t rayleigh_batch = 100000;
};

// Full search on the penalized Rayleigh functional, then the initial
// eigenvalue estimate as the Rayleigh quotient of the best expression.
std::pair<double, SearchResult> initial_gamma(const PDEProblem& eigen_problem,
                                              const SearchConfig& config,
                                              std::size_t rayleigh_batch);

// Alternates G times between a fresh fixed-tree search minimizing the
// simplified residual at the current eigenvalue and a Rayleigh update of the
// eigenvalue from exp(v) on a dedicated batch.
EigenSolveResult iterate_eigenpair(const PDEProblem& eigen_problem, const SearchConfig& config,
                                   const EigenIterConfig& iter);

}  // namespace xpde

#endif
