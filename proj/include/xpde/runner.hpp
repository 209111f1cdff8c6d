#ifndef XPDE_RUNNER_HPP
#define XPDE_RUNNER_HPP

#include <optional>
#include <string>
#include <vector>

#include "xpde/config.hpp"

namespace xpde {

struct RunOutcome {
    int dim = 0;
    int rep = 0;
    std::uint64_t seed = 0;
    bool found = false;
    std::string expression;
    double final_loss = 0.0;
    std::optional<double> rel_l2;
    std::optional<double> final_gamma;
    double seconds = 0.0;
    std::string report_path;
};

struct ExperimentResult {
    std::vector<RunOutcome> runs;
    std::string summary_path;
    std::string histogram_path;
    bool any_found = false;
};

// Executes repetitions x dimensions runs with seeds derived from the master
// seed, writing one JSON report per run as soon as it finishes, plus
// summary.csv (per-dimension statistics; no wall-clock fields, so reruns
// with the same seed are byte-identical) and histogram.csv (per-node
// operator counts over the final pools, aggregated across repetitions).
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Scores one expression string against a problem: functional value on a
// seeded batch, the (1+L)^-1 score, and the relative L2 error when the
// problem has a closed-form solution.
struct ExpressionScore {
    double loss = 0.0;
    double score = 0.0;
    std::optional<double> rel_l2;
};
ExpressionScore score_expression_text(const ExperimentSpec& spec, int dim,
                                      const std::string& expression);

}  // namespace xpde

#endif
