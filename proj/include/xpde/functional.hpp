#ifndef XPDE_FUNCTIONAL_HPP
#define XPDE_FUNCTIONAL_HPP

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "xpde/sampling.hpp"
#include "xpde/sym_graph.hpp"

namespace xpde {

// Which sample stream an integral term is estimated on. Interior and
// Constraint are both volume batches (Constraint exists so a functional can
// use a second, differently sized stream over the same domain).
enum class BatchKind : int { Interior = 0, Boundary = 1, Initial = 2, Constraint = 3 };
constexpr int kNumBatchKinds = 4;

struct BatchSet {
    std::array<SampleBatch, kNumBatchKinds> by_kind;

    SampleBatch& operator[](BatchKind k) { return by_kind[static_cast<std::size_t>(k)]; }
    const SampleBatch& operator[](BatchKind k) const { return by_kind[static_cast<std::size_t>(k)]; }
};

// I = weight * mean over the batch of the integrand.
struct IntegralTerm {
    BatchKind kind;
    NodeId integrand;
};

// How integral estimates combine into the loss value F(I_1..I_m).
struct Combine {
    enum class Kind {
        Linear,              // F = sum coeff_i * I_i
        IntegralConstraint,  // F = I_0 + lambda * (I_1 - target)^2
        Rayleigh,            // F = (I_0 + I_1) / I_2
        RayleighConstrained  // F = (I_0+I_1)/I_2 + lambda1*I_3 + lambda2*(I_2-1)^2
    };
    Kind kind = Kind::Linear;
    std::vector<double> coeff;
    double lambda = 0.0;
    double target = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;

    double value(std::span<const double> I) const;
    void partials(std::span<const double> I, std::span<double> out) const;

    static Combine linear(std::vector<double> coeff);
    static Combine integral_constraint(double lambda, double target);
    static Combine rayleigh();
    static Combine rayleigh_constrained(double lambda1, double lambda2);
};

// A loss functional over a candidate's parameter vector: integral terms on a
// shared symbolic graph plus a combine rule. The graph must not grow after
// an evaluator is built on it.
struct Functional {
    std::shared_ptr<SymGraph> graph;
    std::vector<IntegralTerm> terms;
    Combine combine;
    int n_params = 0;
};

// Chunked batch-major forward/reverse evaluator. value() runs one forward
// sweep per batch kind; value_and_grad() adds one reverse sweep per term and
// accumulates exact parameter gradients.
class FunctionalEvaluator {
public:
    explicit FunctionalEvaluator(Functional f, std::size_t chunk = 256);

    double value(std::span<const double> params, const BatchSet& batches);
    double value_and_grad(std::span<const double> params, const BatchSet& batches,
                          std::span<double> grad_out);

    const Functional& functional() const { return f_; }
    // Integral estimates from the most recent evaluation.
    std::span<const double> last_integrals() const { return last_I_; }

private:
    void run(std::span<const double> params, const BatchSet& batches, bool with_grad);

    Functional f_;
    std::size_t chunk_;
    std::vector<std::vector<NodeId>> forward_order_;   // per batch kind
    std::vector<std::vector<NodeId>> backward_order_;  // per term, descending
    std::vector<int> terms_of_kind_[kNumBatchKinds];
    std::vector<double> values_;
    std::vector<double> adjoint_;
    std::vector<double> term_sum_;
    std::vector<std::vector<double>> term_grad_;
    std::vector<double> last_I_;
};

}  // namespace xpde

#endif
