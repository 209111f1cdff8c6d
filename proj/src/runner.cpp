#include "xpde/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "json.hpp"
#include "xpde/errors.hpp"
#include "xpde/parse.hpp"

namespace xpde {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kRunTag = 21;

std::string fmt(double v) { return format_number(v); }

ordered_json iteration_records(const SearchResult& result) {
    ordered_json arr = ordered_json::array();
    for (const auto& it : result.iterations) {
        ordered_json rec;
        rec["scores"] = it.scores;
        rec["mean_score"] = it.mean_score;
        rec["threshold"] = it.threshold;
        rec["surrogate"] = it.surrogate;
        ordered_json pool = ordered_json::array();
        for (const auto& p : it.pool) pool.push_back({{"ops", p.ops}, {"score", p.score}});
        rec["pool"] = pool;
        arr.push_back(std::move(rec));
    }
    return arr;
}

ordered_json search_json(const SearchResult& result) {
    ordered_json out;
    out["found"] = result.found;
    if (result.found) {
        out["expression"] = result.best->to_string();
        out["operator_sequence"] = result.best->ops().to_string(result.best->tmpl());
        out["final_loss"] = result.best_loss;
        if (result.rel_l2) out["relative_l2_error"] = *result.rel_l2;
    }
    ordered_json pool = ordered_json::array();
    for (const auto& e : result.pool_results)
        pool.push_back({{"ops", e.ops},
                        {"score", e.score},
                        {"finetuned_loss", e.loss},
                        {"expression", e.expression}});
    out["pool"] = pool;
    ordered_json hist = ordered_json::array();
    for (const auto& node : result.histogram) {
        ordered_json counts;
        for (const auto& [op, n] : node) counts[op] = n;
        hist.push_back(std::move(counts));
    }
    out["operator_histogram"] = hist;
    out["iterations"] = iteration_records(result);
    out["seconds"] = result.seconds;
    return out;
}

struct SummaryRow {
    int dim;
    std::vector<double> rel_l2;
    std::vector<double> losses;
    std::vector<double> gammas;
    int found = 0;
    int reps = 0;
};

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string stats_cells(const std::vector<double>& v) {
    if (v.empty()) return ",,";
    const double med = median_of(v);
    const double mn = *std::min_element(v.begin(), v.end());
    const double mx = *std::max_element(v.begin(), v.end());
    return fmt(med) + "," + fmt(mn) + "," + fmt(mx);
}

void write_summary(const std::string& path, const ExperimentSpec& spec,
                   const std::map<int, SummaryRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    out << "problem,mode,dim,repetitions,found,median_rel_l2,min_rel_l2,max_rel_l2,"
           "median_loss,min_loss,max_loss,median_gamma,min_gamma,max_gamma\n";
    for (const auto& [dim, row] : rows) {
        out << spec.problem << "," << name_of(spec.mode) << "," << dim << "," << row.reps << ","
            << row.found << "," << stats_cells(row.rel_l2) << "," << stats_cells(row.losses) << ","
            << stats_cells(row.gammas) << "\n";
    }
}

void write_histogram(const std::string& path,
                     const std::map<int, std::map<int, std::map<std::string, int>>>& hist) {
    std::ofstream out(path, std::ios::trunc);
    out << "dim,node,operator,count\n";
    for (const auto& [dim, nodes] : hist)
        for (const auto& [node, counts] : nodes)
            for (const auto& [op, n] : counts)
                out << dim << "," << node << "," << op << "," << n << "\n";
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    namespace fs = std::filesystem;
    fs::create_directories(spec.output_dir);

    ExperimentResult result;
    std::map<int, SummaryRow> summary;
    std::map<int, std::map<int, std::map<std::string, int>>> histogram;

    RandomStream master(spec.search.seed);

    for (int dim : spec.dims) {
        SummaryRow& row = summary[dim];
        row.dim = dim;
        for (int rep = 0; rep < spec.repetitions; ++rep) {
            RunOutcome outcome;
            outcome.dim = dim;
            outcome.rep = rep;
            outcome.seed = master
                               .child(kRunTag, static_cast<std::uint64_t>(dim),
                                      static_cast<std::uint64_t>(rep))
                               .origin_seed();

            SearchConfig config = spec.search;
            config.seed = outcome.seed;

            ordered_json report;
            report["problem"] = spec.problem;
            report["mode"] = name_of(spec.mode);
            report["dim"] = dim;
            report["rep"] = rep;
            report["seed"] = outcome.seed;
            report["config"] = render_config(spec);

            PDEProblem problem = spec.make_problem(dim);
            if (problem.kind == ProblemKind::Schrodinger)
                report["integral_constraint_target"] = problem.integral_target;

            const SearchResult* hist_source = nullptr;
            SearchResult fixed_result;
            ExpandingResult expanding_result;
            EigenSolveResult eigen_result;

            switch (spec.mode) {
                case RunMode::FixedTree: {
                    fixed_result = search_fixed_tree(problem, config);
                    report["search"] = search_json(fixed_result);
                    outcome.found = fixed_result.found;
                    outcome.seconds = fixed_result.seconds;
                    if (fixed_result.found) {
                        outcome.expression = fixed_result.best->to_string();
                        outcome.final_loss = fixed_result.best_loss;
                        outcome.rel_l2 = fixed_result.rel_l2;
                    }
                    hist_source = &fixed_result;
                    break;
                }
                case RunMode::ExpandingTrees: {
                    expanding_result = search_expanding_trees(
                        problem, spec.expanding_templates, spec.expanding_tolerance, config);
                    ordered_json stages = ordered_json::array();
                    for (std::size_t i = 0; i < expanding_result.per_template.size(); ++i) {
                        ordered_json stage = search_json(expanding_result.per_template[i]);
                        stage["template"] = expanding_result.shapes[i];
                        stages.push_back(std::move(stage));
                        outcome.seconds += expanding_result.per_template[i].seconds;
                    }
                    report["stages"] = stages;
                    report["chosen_template"] = expanding_result.chosen;
                    outcome.found = expanding_result.found;
                    if (expanding_result.found) {
                        const SearchResult& chosen =
                            expanding_result.per_template[static_cast<std::size_t>(
                                expanding_result.chosen)];
                        outcome.expression = chosen.best->to_string();
                        outcome.final_loss = chosen.best_loss;
                        outcome.rel_l2 = chosen.rel_l2;
                        hist_source = &chosen;
                    }
                    break;
                }
                case RunMode::EigenIterative: {
                    eigen_result = iterate_eigenpair(problem, config, spec.eigen);
                    report["gamma_trajectory"] = eigen_result.gamma_trajectory;
                    report["final_gamma"] = eigen_result.final_gamma;
                    report["expression"] = eigen_result.final_expression;
                    ordered_json stages = ordered_json::array();
                    for (const auto& s : eigen_result.searches) {
                        outcome.seconds += s.seconds;
                        stages.push_back(search_json(s));
                    }
                    report["stages"] = stages;
                    outcome.found = eigen_result.found;
                    outcome.expression = eigen_result.final_expression;
                    outcome.final_gamma = eigen_result.final_gamma;
                    if (!eigen_result.searches.empty()) hist_source = &eigen_result.searches.back();
                    break;
                }
            }
            report["seconds"] = outcome.seconds;

            if (outcome.found) {
                row.found += 1;
                if (outcome.rel_l2) row.rel_l2.push_back(*outcome.rel_l2);
                if (spec.mode != RunMode::EigenIterative) row.losses.push_back(outcome.final_loss);
                if (outcome.final_gamma) row.gammas.push_back(*outcome.final_gamma);
            }
            row.reps += 1;

            if (hist_source)
                for (std::size_t node = 0; node < hist_source->histogram.size(); ++node)
                    for (const auto& [op, n] : hist_source->histogram[node])
                        histogram[dim][static_cast<int>(node)][op] += n;

            const std::string report_name = spec.problem + "_" + name_of(spec.mode) + "_d" +
                                            std::to_string(dim) + "_rep" + std::to_string(rep) +
                                            ".json";
            outcome.report_path = (fs::path(spec.output_dir) / report_name).string();
            {
                std::ofstream out(outcome.report_path, std::ios::trunc);
                out << report.dump(2) << "\n";
            }
            result.any_found = result.any_found || outcome.found;
            result.runs.push_back(std::move(outcome));

            // Flush rolling summaries so an interrupted experiment still
            // leaves consistent partial outputs.
            result.summary_path = (fs::path(spec.output_dir) / "summary.csv").string();
            result.histogram_path = (fs::path(spec.output_dir) / "histogram.csv").string();
            write_summary(result.summary_path, spec, summary);
            write_histogram(result.histogram_path, histogram);
        }
    }
    return result;
}

ExpressionScore score_expression_text(const ExperimentSpec& spec, int dim,
                                      const std::string& expression) {
    PDEProblem problem = spec.make_problem(dim);
    SymExpr parsed = parse_expression(expression, problem.n_coords(), problem.timed());

    Functional f = problem.build_functional(parsed.graph, parsed.root, 0);
    FunctionalEvaluator eval(std::move(f));

    RandomStream rng(spec.search.seed);
    SearchConfig config = spec.search;
    BatchSet batches = problem.sample(config.resolved_batches(problem), rng);

    ExpressionScore out;
    out.loss = eval.value({}, batches);
    out.score = score_from_loss(out.loss);
    if (problem.has_true_solution()) {
        RandomStream metric_rng = rng.child(1);
        SampleBatch metric = sample_interior(problem.domain, config.metric_batch, metric_rng);
        NodeId truth = problem.true_solution_node(*parsed.graph);
        out.rel_l2 = relative_l2_error_nodes(parsed.graph, parsed.root, truth, metric, {}, 0);
    }
    return out;
}

}  // namespace xpde
