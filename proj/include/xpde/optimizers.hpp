#ifndef XPDE_OPTIMIZERS_HPP
#define XPDE_OPTIMIZERS_HPP

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "xpde/functional.hpp"
#include "xpde/problems.hpp"
#include "xpde/rng.hpp"

namespace xpde {

struct LrSchedule {
    enum class Kind { Constant, Cosine };
    Kind kind = Kind::Constant;
    double initial = 0.0;
    std::size_t horizon = 0;  // cosine reaches 0 here

    static LrSchedule constant(double rate);
    static LrSchedule cosine(double initial, std::size_t horizon);
    double rate(std::size_t step) const;
};

// Standard bias-corrected Adam. Steps are pure functions of (state, params,
// gradient, rate): identical inputs give bitwise-identical trajectories.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               double rate);

// Dense inverse-Hessian BFGS with a unit trial step and halving backtracking.
// Secant updates are skipped when the curvature y.s is at or below 1e-10, so
// the approximation stays symmetric positive semi-definite.
class BfgsOptimizer {
public:
    enum class Status { Ok, LineSearchFailure };

    explicit BfgsOptimizer(std::size_t n, double trial_step = 1.0, int max_halvings = 10);

    // loss/grad must evaluate on the same fixed batch for the whole call.
    // The accepted point never has a larger loss than the entry point.
    Status step(std::vector<double>& params,
                const std::function<double(std::span<const double>)>& loss,
                const std::function<void(std::span<const double>, std::span<double>)>& grad);

    const std::vector<double>& inverse_hessian() const { return h_; }
    std::size_t dim() const { return n_; }

private:
    std::size_t n_;
    double trial_step_;
    int max_halvings_;
    bool first_update_ = true;
    std::vector<double> h_;  // row-major n x n
    std::vector<double> g0_, g1_, dir_, trial_, s_, y_, hy_;
};

struct CoarseTuneResult {
    std::vector<double> params;
    double loss = 0.0;
    bool failed = false;  // non-finite at some step; loss is +inf
};

// T1 Adam steps then up to T2 BFGS steps, fresh batches per step; the
// returned loss is evaluated on one more fresh batch.
CoarseTuneResult coarse_tune(FunctionalEvaluator& eval, const PDEProblem& problem,
                             const std::array<std::size_t, kNumBatchKinds>& batch_sizes,
                             std::vector<double> params, int t1, int t2, double adam_lr,
                             double bfgs_step_size, RandomStream& rng);

struct FineTuneResult {
    std::vector<double> params;   // best-validation parameters seen
    double loss = 0.0;            // their validation loss
    std::vector<double> val_trace;
    bool aborted = false;
};

// Adam with the given schedule on fresh batches; tracks the best iterate on
// a validation batch drawn once up front. A non-finite step is skipped with
// the rate halved once; a second non-finite step aborts.
FineTuneResult fine_tune(FunctionalEvaluator& eval, const PDEProblem& problem,
                         const std::array<std::size_t, kNumBatchKinds>& batch_sizes,
                         std::vector<double> params, int t3, const LrSchedule& schedule,
                         RandomStream& rng);

}  // namespace xpde

#endif
