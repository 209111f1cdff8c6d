#ifndef XPDE_SEARCH_HPP
#define XPDE_SEARCH_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xpde/controller.hpp"
#include "xpde/expression.hpp"
#include "xpde/problems.hpp"

namespace xpde {

// (1 + L)^-1, with non-finite or failed losses mapped to 0.
double score_from_loss(double loss);

struct PoolEntry {
    OperatorSequence ops;
    double score = 0.0;
    std::vector<double> params;
    std::uint64_t age = 0;  // insertion counter, used to break score ties
};

// Capacity-bounded archive of the best-scoring operator sequences, sorted by
// score descending. Duplicate sequences keep the higher score; when a full
// pool evicts, the lowest score goes first and ties evict the oldest.
class CandidatePool {
public:
    explicit CandidatePool(std::size_t capacity);

    bool insert(const OperatorSequence& ops, double score, std::vector<double> params);

    const std::vector<PoolEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    double min_score() const;

private:
    std::size_t capacity_;
    std::uint64_t counter_ = 0;
    std::vector<PoolEntry> entries_;
};

struct SearchConfig {
    int T = 1000;
    int N = 10;
    int K = 10;
    int T1 = 20;
    int T2 = 20;
    int T3 = 20000;
    double epsilon = 0.1;
    double nu = 0.5;
    bool risk_seeking = true;
    double controller_lr = 0.002;
    double coarse_adam_lr = 0.001;
    double bfgs_step = 1.0;
    double finetune_lr = 0.01;
    LrSchedule::Kind finetune_schedule = LrSchedule::Kind::Cosine;
    std::array<std::size_t, kNumBatchKinds> batch_sizes{0, 0, 0, 0};  // 0: problem default
    std::size_t metric_batch = 100000;
    std::string template_shape;  // empty: depth-3 default
    OperatorSet op_set = OperatorSet::defaults();
    ControllerConfig controller;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
    std::array<std::size_t, kNumBatchKinds> resolved_batches(const PDEProblem& problem) const;
};

struct ScoredCandidate {
    double score = 0.0;
    double loss = 0.0;
    std::vector<double> params;
};

// Random init, T1 Adam + T2 BFGS coarse tune, then (1+L)^-1. Failures and
// divergence are absorbed into score 0.
ScoredCandidate compute_score(const TreeTemplatePtr& tmpl, const OperatorSequence& ops,
                              const PDEProblem& problem, const SearchConfig& config,
                              RandomStream& rng);

struct PoolSnapshotEntry {
    std::string ops;
    double score = 0.0;
};

struct IterationRecord {
    std::vector<double> scores;
    double mean_score = 0.0;
    double threshold = 0.0;
    double surrogate = 0.0;
    std::vector<PoolSnapshotEntry> pool;
};

struct FineTunedEntry {
    std::string ops;
    double score = 0.0;       // coarse score when pooled
    double loss = 0.0;        // fine-tuned functional value on a fresh batch
    std::string expression;
};

// Per-node operator counts over the final pool.
using NodeHistogram = std::vector<std::map<std::string, int>>;

struct SearchResult {
    bool found = false;
    std::optional<Expression> best;
    double best_loss = 0.0;
    std::optional<double> rel_l2;
    std::vector<IterationRecord> iterations;
    std::vector<FineTunedEntry> pool_results;
    NodeHistogram histogram;
    double seconds = 0.0;
};

// The fixed-tree searching loop: sample N sequences, score, pool, update the
// controller, T times; then fine-tune every pool entry and return the one
// with the smallest fine-tuned functional value.
SearchResult search_fixed_tree(const PDEProblem& problem, const SearchConfig& config);

struct ExpandingResult {
    std::vector<SearchResult> per_template;
    std::vector<std::string> shapes;
    int chosen = -1;
    bool found = false;
};

// Runs the fixed-tree search template by template, stopping at the first
// whose fine-tuned functional value is at or below the tolerance; otherwise
// returns the overall minimum.
ExpandingResult search_expanding_trees(const PDEProblem& problem,
                                       const std::vector<std::string>& template_shapes,
                                       double tolerance, const SearchConfig& config);

}  // namespace xpde

#endif
