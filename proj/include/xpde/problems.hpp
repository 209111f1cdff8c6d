#ifndef XPDE_PROBLEMS_HPP
#define XPDE_PROBLEMS_HPP

#include <array>
#include <functional>
#include <memory>
#include <string>

#include "xpde/expression.hpp"
#include "xpde/functional.hpp"
#include "xpde/sampling.hpp"

namespace xpde {

enum class ProblemKind {
    Poisson,          // -Δu = -d on [-1,1]^d, Dirichlet data from the quadratic solution
    Conservation,     // (πd/4) u_t - Σ u_xi = 0 on [0,1]x[-1,1]^d with sine initial data
    Schrodinger,      // -Δu + u^3 + V u = 0 on [-1,1]^d with an integral constraint
    Eigen,            // Rayleigh quotient of -Δ + |x|^2 on [-3,3]^d with penalties
    EigenSimplified,  // residual -Δv - |∇v|^2 + |x|^2 - γ, least squares
};

// A benchmark definition: domain, batch-size defaults, penalty weights and
// the rule for building the loss functional of a candidate graph root.
struct PDEProblem {
    ProblemKind kind;
    std::string name;
    int dim = 1;  // spatial dimension
    DomainSpec domain;
    std::array<std::size_t, kNumBatchKinds> default_batches{0, 0, 0, 0};
    double lambda = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    // Conservation: scale the time derivative by πd/4 so the stated closed
    // form solves the residual exactly; false selects the unscaled u_t form.
    bool scaled_time_derivative = true;
    double integral_target = 0.0;  // Schrodinger constraint constant
    double gamma = 0.0;            // EigenSimplified eigenvalue estimate

    bool timed() const { return domain.timed; }
    int n_coords() const { return domain.n_coords(); }
    std::vector<int> space_coords() const;

    Functional build_functional(std::shared_ptr<SymGraph> graph, NodeId u, int n_params) const;

    bool has_true_solution() const;
    NodeId true_solution_node(SymGraph& g) const;
    double true_solution(std::span<const double> point) const;

    BatchSet sample(const std::array<std::size_t, kNumBatchKinds>& sizes, RandomStream& rng) const;
    BatchSet sample_default(RandomStream& rng) const { return sample(default_batches, rng); }
};

PDEProblem poisson_problem(int dim, double lambda = 100.0);
PDEProblem conservation_problem(int dim, double lambda = 100.0, bool scaled_time_derivative = true);
// Estimates the constraint constant with 10^6 uniform samples under a fixed
// dedicated seed at construction.
PDEProblem schrodinger_problem(int dim, double lambda = 1.0);
PDEProblem eigen_problem(int dim, double lambda1 = 500.0, double lambda2 = 500.0);
PDEProblem eigen_simplified_problem(int dim, double gamma);

// Problem lookup by name: poisson | conservation | schrodinger | eigen.
PDEProblem problem_by_name(const std::string& name, int dim);

// Generic functional builders.
Functional least_squares_functional(std::shared_ptr<SymGraph> g, NodeId interior_residual,
                                    NodeId boundary_residual, double lambda, int n_params);
// 1/2 ∫ (|∇u|^2 + c u^2) - ∫ f u + λ ∫_boundary u^2. Pass kNoNode for a zero c.
Functional variational_functional(std::shared_ptr<SymGraph> g, NodeId u, NodeId c, NodeId f,
                                  double lambda, std::span<const int> coords, int n_params);

// (∫|∇u|^2 + ∫ w u^2) / ∫ u^2 over one interior batch. Throws
// DegenerateDenominatorError when the denominator estimate is below 1e-12.
double rayleigh_quotient(std::shared_ptr<SymGraph> g, NodeId u, NodeId w,
                         std::span<const int> coords, const SampleBatch& interior,
                         std::span<const double> params, int n_params);

// ||cand - truth|| / ||truth|| over one shared batch (pointwise evaluators).
double relative_l2_error(const std::function<double(std::span<const double>)>& candidate,
                         const std::function<double(std::span<const double>)>& truth,
                         const SampleBatch& batch);

// Same metric with graph roots in a shared graph (batched evaluation).
double relative_l2_error_nodes(std::shared_ptr<SymGraph> g, NodeId candidate, NodeId truth,
                               const SampleBatch& batch, std::span<const double> params,
                               int n_params);

// Relative L2 error of an expression against the problem's closed form.
double relative_l2_error_vs_truth(const PDEProblem& problem, const Expression& expr,
                                  const SampleBatch& batch);

// Builds |x|^2 over the given coordinates.
NodeId norm_sq_node(SymGraph& g, std::span<const int> coords);

}  // namespace xpde

#endif
