#include "xpde/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "xpde/errors.hpp"

namespace xpde {

namespace {

// Child-stream tags for the seed hierarchy. A search is a pure function of
// (problem, config) because every random draw comes from a stream derived
// from (master seed, fixed tag, loop indices).
enum StreamTag : std::uint64_t {
    TagControllerInit = 1,
    TagSample = 2,
    TagScore = 3,
    TagFinetune = 4,
    TagFinalEval = 5,
    TagMetric = 6,
    TagTemplate = 7,
};

// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items are
// independent; results must be written to preassigned slots.
void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = std::min(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w]() {
            for (int i = w; i < count; i += workers) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

double score_from_loss(double loss) {
    if (!std::isfinite(loss)) return 0.0;
    if (loss < 0.0) return 1.0;
    return 1.0 / (1.0 + loss);
}

CandidatePool::CandidatePool(std::size_t capacity) : capacity_(capacity) {}

double CandidatePool::min_score() const {
    return entries_.empty() ? -std::numeric_limits<double>::infinity() : entries_.back().score;
}

bool CandidatePool::insert(const OperatorSequence& ops, double score, std::vector<double> params) {
    if (!std::isfinite(score)) return false;
    if (capacity_ == 0) return false;

    auto resort = [this]() {
        std::stable_sort(entries_.begin(), entries_.end(), [](const PoolEntry& a, const PoolEntry& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.age < b.age;
        });
    };

    for (auto& e : entries_) {
        if (e.ops == ops) {
            if (score > e.score) {
                e.score = score;
                e.params = std::move(params);
                resort();
                return true;
            }
            return false;
        }
    }

    if (entries_.size() < capacity_) {
        entries_.push_back(PoolEntry{ops, score, std::move(params), counter_++});
        resort();
        return true;
    }

    if (score <= entries_.back().score) return false;

    // Evict the minimum; among equal minimum scores the oldest goes.
    std::size_t victim = entries_.size() - 1;
    for (std::size_t i = entries_.size(); i-- > 0;) {
        if (entries_[i].score != entries_.back().score) break;
        if (entries_[i].age < entries_[victim].age) victim = i;
    }
    entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
    entries_.push_back(PoolEntry{ops, score, std::move(params), counter_++});
    resort();
    return true;
}

void SearchConfig::validate() const {
    if (T < 0 || N < 1 || K < 1 || T1 < 0 || T2 < 0 || T3 < 0)
        throw ConfigError("search config: negative iteration counts");
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw ConfigError("search config: epsilon must satisfy 0 <= epsilon < 1");
    if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("search config: nu must satisfy 0 < nu <= 1");
    if (controller_lr <= 0.0 || coarse_adam_lr <= 0.0 || finetune_lr <= 0.0 || bfgs_step <= 0.0)
        throw ConfigError("search config: learning rates must be positive");
    op_set.validate();
}

std::array<std::size_t, kNumBatchKinds> SearchConfig::resolved_batches(
    const PDEProblem& problem) const {
    std::array<std::size_t, kNumBatchKinds> sizes = problem.default_batches;
    for (int k = 0; k < kNumBatchKinds; ++k)
        if (batch_sizes[static_cast<std::size_t>(k)] > 0 && sizes[static_cast<std::size_t>(k)] > 0)
            sizes[static_cast<std::size_t>(k)] = batch_sizes[static_cast<std::size_t>(k)];
    return sizes;
}

ScoredCandidate compute_score(const TreeTemplatePtr& tmpl, const OperatorSequence& ops,
                              const PDEProblem& problem, const SearchConfig& config,
                              RandomStream& rng) {
    ScoredCandidate out;
    try {
        std::vector<double> params0 = random_params(*tmpl, rng);
        Expression expr(tmpl, ops, params0);

        auto graph = std::make_shared<SymGraph>();
        NodeId u = expr.build_graph(*graph);
        Functional f = problem.build_functional(graph, u, tmpl->param_count());
        FunctionalEvaluator eval(std::move(f));

        CoarseTuneResult tuned =
            coarse_tune(eval, problem, config.resolved_batches(problem), std::move(params0),
                        config.T1, config.T2, config.coarse_adam_lr, config.bfgs_step, rng);
        if (tuned.failed) {
            out.loss = std::numeric_limits<double>::infinity();
            out.score = 0.0;
            return out;
        }
        out.loss = tuned.loss;
        out.score = score_from_loss(tuned.loss);
        out.params = std::move(tuned.params);
    } catch (const std::exception&) {
        out.loss = std::numeric_limits<double>::infinity();
        out.score = 0.0;
        out.params = {};
    }
    return out;
}

namespace {

TreeTemplatePtr make_template(const PDEProblem& problem, const SearchConfig& config) {
    const std::string shape =
        config.template_shape.empty() ? TreeTemplate::shape_for_depth(3) : config.template_shape;
    return std::make_shared<TreeTemplate>(shape, problem.n_coords(), problem.timed());
}

NodeHistogram pool_histogram(const CandidatePool& pool, const TreeTemplate& tmpl) {
    NodeHistogram hist(static_cast<std::size_t>(tmpl.size()));
    for (const auto& entry : pool.entries()) {
        for (int i = 0; i < tmpl.size(); ++i) {
            const std::string op_name = tmpl.node(i).is_binary
                                            ? name_of(entry.ops.binary_at(i))
                                            : name_of(entry.ops.unary_at(i));
            hist[static_cast<std::size_t>(i)][op_name] += 1;
        }
    }
    return hist;
}

}  // namespace

SearchResult search_fixed_tree(const PDEProblem& problem, const SearchConfig& config) {
    config.validate();
    const auto t_start = std::chrono::steady_clock::now();

    TreeTemplatePtr tmpl = make_template(problem, config);
    RandomStream master(config.seed);

    RandomStream controller_rng = master.child(TagControllerInit);
    Controller controller(tmpl, config.op_set, config.controller, controller_rng);

    CandidatePool pool(static_cast<std::size_t>(config.K));
    SearchResult result;
    result.iterations.reserve(static_cast<std::size_t>(config.T));

    for (int t = 0; t < config.T; ++t) {
        RandomStream sample_rng = master.child(TagSample, static_cast<std::uint64_t>(t));
        SampledBatch batch = controller.sample_sequences(config.N, config.epsilon, sample_rng);

        std::vector<ScoredCandidate> scored(static_cast<std::size_t>(config.N));
        parallel_for(config.N, config.threads, [&](int n) {
            RandomStream rng = master.child(TagScore, static_cast<std::uint64_t>(t),
                                            static_cast<std::uint64_t>(n));
            scored[static_cast<std::size_t>(n)] =
                compute_score(tmpl, batch.sequences[static_cast<std::size_t>(n)].ops, problem,
                              config, rng);
        });

        std::vector<double> scores(static_cast<std::size_t>(config.N));
        for (int n = 0; n < config.N; ++n) {
            scores[static_cast<std::size_t>(n)] = scored[static_cast<std::size_t>(n)].score;
            pool.insert(batch.sequences[static_cast<std::size_t>(n)].ops,
                        scored[static_cast<std::size_t>(n)].score,
                        std::move(scored[static_cast<std::size_t>(n)].params));
        }

        Controller::UpdateInfo info =
            controller.update(batch, scores, config.nu, config.controller_lr, config.risk_seeking);

        IterationRecord rec;
        rec.scores = std::move(scores);
        rec.mean_score = info.mean_score;
        rec.threshold = info.threshold;
        rec.surrogate = info.surrogate;
        for (const auto& e : pool.entries())
            rec.pool.push_back(PoolSnapshotEntry{e.ops.to_string(*tmpl), e.score});
        result.iterations.push_back(std::move(rec));
    }

    if (pool.size() == 0) {
        result.found = false;
        result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return result;
    }

    // Fine-tune every pool entry; the returned expression minimizes the
    // functional evaluated on a fresh batch.
    const auto& entries = pool.entries();
    const int n_entries = static_cast<int>(entries.size());
    std::vector<FineTunedEntry> tuned(static_cast<std::size_t>(n_entries));
    std::vector<std::vector<double>> tuned_params(static_cast<std::size_t>(n_entries));
    const auto sizes = config.resolved_batches(problem);

    parallel_for(n_entries, config.threads, [&](int i) {
        const PoolEntry& entry = entries[static_cast<std::size_t>(i)];
        FineTunedEntry& out = tuned[static_cast<std::size_t>(i)];
        out.ops = entry.ops.to_string(*tmpl);
        out.score = entry.score;
        try {
            auto graph = std::make_shared<SymGraph>();
            Expression expr(tmpl, entry.ops, entry.params);
            NodeId u = expr.build_graph(*graph);
            Functional f = problem.build_functional(graph, u, tmpl->param_count());
            FunctionalEvaluator eval(std::move(f));

            RandomStream rng = master.child(TagFinetune, static_cast<std::uint64_t>(i));
            LrSchedule sched = config.finetune_schedule == LrSchedule::Kind::Cosine
                                   ? LrSchedule::cosine(config.finetune_lr,
                                                        static_cast<std::size_t>(config.T3))
                                   : LrSchedule::constant(config.finetune_lr);
            FineTuneResult ft = fine_tune(eval, problem, sizes, entry.params, config.T3, sched, rng);

            RandomStream eval_rng = master.child(TagFinalEval, static_cast<std::uint64_t>(i));
            BatchSet fresh = problem.sample(sizes, eval_rng);
            out.loss = eval.value(ft.params, fresh);
            tuned_params[static_cast<std::size_t>(i)] = std::move(ft.params);
            out.expression = Expression(tmpl, entry.ops, tuned_params[static_cast<std::size_t>(i)])
                                 .to_string();
        } catch (const std::exception&) {
            out.loss = std::numeric_limits<double>::infinity();
            tuned_params[static_cast<std::size_t>(i)] = {};
        }
    });

    int best_idx = -1;
    for (int i = 0; i < n_entries; ++i) {
        if (tuned_params[static_cast<std::size_t>(i)].empty()) continue;
        if (best_idx < 0 || tuned[static_cast<std::size_t>(i)].loss < tuned[static_cast<std::size_t>(best_idx)].loss)
            best_idx = i;
    }
    result.pool_results = std::move(tuned);
    result.histogram = pool_histogram(pool, *tmpl);

    if (best_idx >= 0) {
        result.found = true;
        result.best = Expression(tmpl, entries[static_cast<std::size_t>(best_idx)].ops,
                                 tuned_params[static_cast<std::size_t>(best_idx)]);
        result.best_loss = result.pool_results[static_cast<std::size_t>(best_idx)].loss;
        if (problem.has_true_solution()) {
            RandomStream metric_rng = master.child(TagMetric);
            SampleBatch metric = sample_interior(problem.domain, config.metric_batch, metric_rng);
            try {
                result.rel_l2 = relative_l2_error_vs_truth(problem, *result.best, metric);
            } catch (const std::exception&) {
                result.rel_l2.reset();
            }
        }
    }

    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

ExpandingResult search_expanding_trees(const PDEProblem& problem,
                                       const std::vector<std::string>& template_shapes,
                                       double tolerance, const SearchConfig& config) {
    if (template_shapes.empty())
        throw ConfigError("search_expanding_trees: template list must be non-empty");
    ExpandingResult out;
    out.shapes = template_shapes;
    RandomStream master(config.seed);

    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < template_shapes.size(); ++i) {
        SearchConfig c = config;
        c.template_shape = template_shapes[i];
        c.seed = master.child(TagTemplate, i).origin_seed();
        SearchResult r = search_fixed_tree(problem, c);
        const bool found = r.found;
        const double loss = r.best_loss;
        out.per_template.push_back(std::move(r));
        if (found && (out.chosen < 0 || loss < best_loss)) {
            out.chosen = static_cast<int>(i);
            best_loss = loss;
            out.found = true;
        }
        if (found && loss <= tolerance) {
            out.chosen = static_cast<int>(i);
            out.found = true;
            break;
        }
    }
    return out;
}

}  // namespace xpde
