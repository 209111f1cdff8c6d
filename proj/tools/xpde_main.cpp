#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "xpde/config.hpp"
#include "xpde/errors.hpp"
#include "xpde/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitNoCandidate = 3;

struct CommonOpts {
    std::string profile = "paper";
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

xpde::ExperimentSpec load_spec(const std::string& config_path, const CommonOpts& opts) {
    xpde::ExperimentSpec spec = config_path.empty()
                                    ? xpde::profile_defaults(opts.profile)
                                    : xpde::load_config_file(config_path, opts.profile);
    if (opts.seed_set) spec.search.seed = opts.seed;
    if (!opts.out.empty()) spec.output_dir = opts.out;
    if (opts.threads > 0) spec.search.threads = opts.threads;
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"expression-search PDE solver"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string config_path;
    std::string expr_text;
    std::string problem_name;
    int score_dim = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--profile", opts.profile, "hyperparameter profile: desk or paper");
        cmd->add_option("--out", opts.out, "output directory");
        cmd->add_option("--seed", opts.seed, "master seed")->each([&](const std::string&) {
            opts.seed_set = true;
        });
        cmd->add_option("--threads", opts.threads, "worker threads for candidate scoring");
    };

    CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", config_path, "config file path")->required();
    add_common(run);

    CLI::App* validate = app.add_subcommand("validate", "check a config and print it resolved");
    validate->add_option("config", config_path, "config file path")->required();
    add_common(validate);

    CLI::App* score = app.add_subcommand("score", "score an expression string against a problem");
    score->add_option("--expr", expr_text, "expression text, e.g. \"0.5*(x1^2)+0.5*(x2^2)\"")
        ->required();
    score->add_option("--problem", problem_name,
                      "problem name (poisson, conservation, schrodinger, eigen)");
    score->add_option("--dim", score_dim, "spatial dimension");
    score->add_option("--config", config_path, "optional config file for overrides");
    add_common(score);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            xpde::ExperimentSpec spec = load_spec(config_path, opts);
            xpde::ExperimentResult result = xpde::run_experiment(spec);
            for (const auto& r : result.runs) {
                std::printf("d=%d rep=%d %s", r.dim, r.rep, r.found ? "ok" : "NO-CANDIDATE");
                if (r.found && !r.final_gamma) std::printf(" loss=%.6g", r.final_loss);
                if (r.rel_l2) std::printf(" rel_l2=%.6g", *r.rel_l2);
                if (r.final_gamma) std::printf(" gamma=%.6g", *r.final_gamma);
                std::printf(" report=%s\n", r.report_path.c_str());
            }
            std::printf("summary: %s\nhistogram: %s\n", result.summary_path.c_str(),
                        result.histogram_path.c_str());
            return result.any_found ? kExitOk : kExitNoCandidate;
        }
        if (validate->parsed()) {
            xpde::ExperimentSpec spec = load_spec(config_path, opts);
            std::cout << xpde::render_config(spec);
            return kExitOk;
        }
        if (score->parsed()) {
            xpde::ExperimentSpec spec = load_spec(config_path, opts);
            if (!problem_name.empty()) spec.problem = problem_name;
            if (score_dim > 0) spec.dims = {score_dim};
            spec.validate();
            xpde::ExpressionScore s =
                xpde::score_expression_text(spec, spec.dims.front(), expr_text);
            std::printf("functional = %.17g\n", s.loss);
            std::printf("score = %.17g\n", s.score);
            if (s.rel_l2) std::printf("relative_l2_error = %.17g\n", *s.rel_l2);
            return kExitOk;
        }
    } catch (const xpde::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kExitOk;
}
