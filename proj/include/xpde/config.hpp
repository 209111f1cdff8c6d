#ifndef XPDE_CONFIG_HPP
#define XPDE_CONFIG_HPP

#include <string>
#include <vector>

#include "xpde/eigen_iter.hpp"
#include "xpde/search.hpp"

namespace xpde {

enum class RunMode { FixedTree, ExpandingTrees, EigenIterative };

const char* name_of(RunMode mode);

// A fully resolved experiment: problem selection, repetition plan and every
// hyperparameter of the underlying searches.
struct ExperimentSpec {
    std::string problem = "poisson";
    std::vector<int> dims = {2};
    int repetitions = 6;
    RunMode mode = RunMode::FixedTree;

    SearchConfig search;

    // -1 keeps the problem's default penalty.
    double lambda = -1.0;
    double lambda1 = -1.0;
    double lambda2 = -1.0;
    bool conservation_scaled = true;

    std::vector<std::string> expanding_templates;
    double expanding_tolerance = 1e-6;
    EigenIterConfig eigen;

    std::string output_dir = "runs";
    std::string profile = "paper";

    void validate() const;
    PDEProblem make_problem(int dim) const;
};

// Built-in profiles: "paper" keeps the publication-scale defaults; "desk"
// shrinks the searching loop (T=200, T3=2000, smaller batches) so a full
// experiment runs in minutes.
ExperimentSpec profile_defaults(const std::string& profile);

// Parses INI-style text ([section] then key = value lines, # or ; comments)
// on top of the given profile's defaults. Unknown sections or keys and
// malformed values raise ConfigError with the offending line number.
ExperimentSpec validate_config(const std::string& text, const std::string& profile = "paper");

ExperimentSpec load_config_file(const std::string& path, const std::string& profile = "paper");

// The template shape table: depth3 | depth4 | depth6 | depthN | raw shape
// strings like "u(b(u,u))".
std::string resolve_template_shape(const std::string& name);

// Renders the fully resolved spec back as config text (the materialized
// defaults, suitable for embedding into reports).
std::string render_config(const ExperimentSpec& spec);

}  // namespace xpde

#endif
