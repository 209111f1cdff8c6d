#ifndef XPDE_CONTROLLER_HPP
#define XPDE_CONTROLLER_HPP

#include <span>
#include <vector>

#include "xpde/expression.hpp"
#include "xpde/optimizers.hpp"
#include "xpde/rng.hpp"

namespace xpde {

struct ControllerConfig {
    enum class Arch {
        Table,  // constant input into one linear layer: a learnable logit table
        Mlp     // one tanh hidden layer between the constant input and the logits
    };
    Arch arch = Arch::Table;
    int hidden_width = 64;
    double learning_rate = 0.002;
};

// One sampled operator sequence with the policy log-probabilities of the
// realized choices (recorded under the policy pmf even for exploration
// draws) and per-node exploration flags.
struct SampledSequence {
    OperatorSequence ops;
    std::vector<double> log_probs;
    std::vector<char> explored;

    double total_log_prob() const {
        double s = 0.0;
        for (double lp : log_probs) s += lp;
        return s;
    }
};

struct SampledBatch {
    std::vector<SampledSequence> sequences;
};

// The (1-nu)-quantile under the lower empirical convention: the
// ceil((1-nu)*N)-th smallest score, floor-guarded to the first.
double quantile_threshold(std::span<const double> scores, double nu);

// Per-node categorical policy over the operator alphabets. Output width is
// n_binary*|B| + n_unary*|U|; node slices follow template node order.
class Controller {
public:
    Controller(TreeTemplatePtr tmpl, OperatorSet op_set, ControllerConfig config,
               RandomStream& init_rng);

    int output_width() const { return width_; }
    const OperatorSet& op_set() const { return op_set_; }

    // Softmax pmf per template node under the current parameters.
    std::vector<std::vector<double>> node_distributions() const;

    // Per node independently: with probability epsilon a uniform draw over
    // the node's alphabet, otherwise a draw from the node's pmf.
    SampledBatch sample_sequences(int n, double epsilon, RandomStream& rng) const;

    // sum_k w_k * sum_i log p_i(e_i^k) at the current parameters, where w_k
    // is (S_k - threshold) * indicator(S_k >= threshold) / N in risk-seeking
    // mode and S_k / N otherwise.
    double surrogate_objective(const SampledBatch& batch, std::span<const double> scores,
                               double nu, bool risk_seeking) const;

    struct UpdateInfo {
        double threshold = 0.0;
        double surrogate = 0.0;
        double mean_score = 0.0;
        int contributors = 0;
    };

    // Ascent gradient of the surrogate objective with respect to the packed
    // parameters, evaluated at the current parameters.
    std::vector<double> objective_gradient(const SampledBatch& batch,
                                           std::span<const double> scores, double nu,
                                           bool risk_seeking) const;

    // One policy-gradient ascent step (Adam on the negated objective). An
    // exactly zero gradient leaves the parameters untouched.
    UpdateInfo update(const SampledBatch& batch, std::span<const double> scores, double nu,
                      double learning_rate, bool risk_seeking);

    const std::vector<double>& phi() const { return phi_; }
    void set_phi(std::vector<double> phi);

private:
    std::vector<double> logits() const;
    void accumulate_logit_grad_to_phi(std::span<const double> dlogits, std::span<double> dphi) const;
    int node_width(int node) const;

    TreeTemplatePtr tmpl_;
    OperatorSet op_set_;
    ControllerConfig config_;
    std::vector<int> slice_offset_;
    int width_ = 0;
    std::vector<double> phi_;
    AdamState adam_;
};

}  // namespace xpde

#endif
