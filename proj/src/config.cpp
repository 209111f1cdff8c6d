#include "xpde/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "xpde/errors.hpp"
#include "xpde/expression.hpp"

namespace xpde {

const char* name_of(RunMode mode) {
    switch (mode) {
        case RunMode::FixedTree: return "fixed_tree";
        case RunMode::ExpandingTrees: return "expanding_trees";
        case RunMode::EigenIterative: return "eigen_iterative";
    }
    return "?";
}

std::string resolve_template_shape(const std::string& name) {
    if (name.find('(') != std::string::npos || name == "u") return name;
    if (name.rfind("depth", 0) == 0) {
        int k = 0;
        const char* b = name.data() + 5;
        auto [p, ec] = std::from_chars(b, name.data() + name.size(), k);
        if (ec == std::errc{} && p == name.data() + name.size())
            return TreeTemplate::shape_for_depth(k);
    }
    throw ConfigError("unknown template '" + name + "' (use depthN or an explicit shape)");
}

ExperimentSpec profile_defaults(const std::string& profile) {
    ExperimentSpec spec;
    spec.profile = profile;
    if (profile == "paper") return spec;
    if (profile == "desk") {
        spec.search.T = 200;
        spec.search.T3 = 8000;
        spec.search.batch_sizes = {1000, 200, 500, 2000};
        spec.search.metric_batch = 20000;
        spec.eigen.rayleigh_batch = 100000;
        return spec;
    }
    throw ConfigError("unknown profile '" + profile + "' (valid: desk, paper)");
}

void ExperimentSpec::validate() const {
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (dims.empty()) throw ConfigError("at least one dimension is required");
    for (int d : dims)
        if (d < 1) throw ConfigError("dimensions must be positive");
    search.validate();
    if (mode == RunMode::ExpandingTrees && expanding_templates.empty())
        throw ConfigError("expanding_trees mode needs a template list");
    if (eigen.G < 1) throw ConfigError("eigen iteration count G must be >= 1");
    problem_by_name(problem, dims.front());  // name check
}

PDEProblem ExperimentSpec::make_problem(int dim) const {
    if (problem == "poisson") return poisson_problem(dim, lambda < 0 ? 100.0 : lambda);
    if (problem == "conservation")
        return conservation_problem(dim, lambda < 0 ? 100.0 : lambda, conservation_scaled);
    if (problem == "schrodinger") return schrodinger_problem(dim, lambda < 0 ? 1.0 : lambda);
    if (problem == "eigen")
        return eigen_problem(dim, lambda1 < 0 ? 500.0 : lambda1, lambda2 < 0 ? 500.0 : lambda2);
    throw ConfigError("unknown problem '" + problem + "'");
}

namespace {

struct KeyValue {
    std::string section;
    std::string key;
    std::string value;
    int line;
};

[[noreturn]] void fail_at(int line, const std::string& msg) {
    throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<KeyValue> parse_ini(const std::string& text) {
    std::vector<KeyValue> out;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') fail_at(lineno, "unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) fail_at(lineno, "expected 'key = value'");
        KeyValue kv;
        kv.section = section;
        kv.key = trim(t.substr(0, eq));
        kv.value = trim(t.substr(eq + 1));
        kv.line = lineno;
        if (kv.key.empty()) fail_at(lineno, "empty key");
        out.push_back(std::move(kv));
    }
    return out;
}

double parse_double(const KeyValue& kv) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(kv.value, &pos);
        if (pos != kv.value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        fail_at(kv.line, "'" + kv.key + "' expects a number, got '" + kv.value + "'");
    }
}

long long parse_int(const KeyValue& kv) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(kv.value, &pos);
        if (pos != kv.value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        fail_at(kv.line, "'" + kv.key + "' expects an integer, got '" + kv.value + "'");
    }
}

bool parse_bool(const KeyValue& kv) {
    if (kv.value == "true" || kv.value == "1" || kv.value == "yes") return true;
    if (kv.value == "false" || kv.value == "0" || kv.value == "no") return false;
    fail_at(kv.line, "'" + kv.key + "' expects true/false");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

void apply_experiment_key(ExperimentSpec& spec, const KeyValue& kv) {
    if (kv.key == "problem") {
        spec.problem = kv.value;
    } else if (kv.key == "dim") {
        spec.dims.clear();
        for (const auto& part : split_list(kv.value)) {
            KeyValue sub{kv.section, kv.key, part, kv.line};
            spec.dims.push_back(static_cast<int>(parse_int(sub)));
        }
        if (spec.dims.empty()) fail_at(kv.line, "'dim' expects at least one value");
    } else if (kv.key == "repetitions") {
        spec.repetitions = static_cast<int>(parse_int(kv));
    } else if (kv.key == "mode") {
        if (kv.value == "fixed_tree")
            spec.mode = RunMode::FixedTree;
        else if (kv.value == "expanding_trees")
            spec.mode = RunMode::ExpandingTrees;
        else if (kv.value == "eigen_iterative")
            spec.mode = RunMode::EigenIterative;
        else
            fail_at(kv.line, "mode must be fixed_tree, expanding_trees or eigen_iterative");
    } else if (kv.key == "seed") {
        spec.search.seed = static_cast<std::uint64_t>(parse_int(kv));
    } else if (kv.key == "threads") {
        spec.search.threads = static_cast<int>(parse_int(kv));
    } else if (kv.key == "output") {
        spec.output_dir = kv.value;
    } else {
        fail_at(kv.line, "unknown key '" + kv.key + "' in [experiment]");
    }
}

void apply_search_key(ExperimentSpec& spec, const KeyValue& kv) {
    SearchConfig& s = spec.search;
    if (kv.key == "T") s.T = static_cast<int>(parse_int(kv));
    else if (kv.key == "N") s.N = static_cast<int>(parse_int(kv));
    else if (kv.key == "K") s.K = static_cast<int>(parse_int(kv));
    else if (kv.key == "T1") s.T1 = static_cast<int>(parse_int(kv));
    else if (kv.key == "T2") s.T2 = static_cast<int>(parse_int(kv));
    else if (kv.key == "T3") s.T3 = static_cast<int>(parse_int(kv));
    else if (kv.key == "epsilon") s.epsilon = parse_double(kv);
    else if (kv.key == "nu") s.nu = parse_double(kv);
    else if (kv.key == "risk_seeking") s.risk_seeking = parse_bool(kv);
    else if (kv.key == "controller_lr") s.controller_lr = parse_double(kv);
    else if (kv.key == "adam_lr") s.coarse_adam_lr = parse_double(kv);
    else if (kv.key == "bfgs_step") s.bfgs_step = parse_double(kv);
    else if (kv.key == "finetune_lr") s.finetune_lr = parse_double(kv);
    else if (kv.key == "finetune_schedule") {
        if (kv.value == "cosine") s.finetune_schedule = LrSchedule::Kind::Cosine;
        else if (kv.value == "constant") s.finetune_schedule = LrSchedule::Kind::Constant;
        else fail_at(kv.line, "finetune_schedule must be cosine or constant");
    } else if (kv.key == "template") {
        s.template_shape = resolve_template_shape(kv.value);
    } else if (kv.key == "binary_ops") {
        s.op_set.binary.clear();
        for (const auto& name : split_list(kv.value)) {
            auto op = binary_op_from_name(name);
            if (!op) fail_at(kv.line, "unknown binary operator '" + name + "'");
            s.op_set.binary.push_back(*op);
        }
    } else if (kv.key == "unary_ops") {
        s.op_set.unary.clear();
        for (const auto& name : split_list(kv.value)) {
            auto op = unary_op_from_name(name);
            if (!op) fail_at(kv.line, "unknown unary operator '" + name + "'");
            s.op_set.unary.push_back(*op);
        }
    } else if (kv.key == "controller_arch") {
        if (kv.value == "table") s.controller.arch = ControllerConfig::Arch::Table;
        else if (kv.value == "mlp") s.controller.arch = ControllerConfig::Arch::Mlp;
        else fail_at(kv.line, "controller_arch must be table or mlp");
    } else if (kv.key == "controller_hidden") {
        s.controller.hidden_width = static_cast<int>(parse_int(kv));
    } else if (kv.key == "metric_batch") {
        s.metric_batch = static_cast<std::size_t>(parse_int(kv));
    } else {
        fail_at(kv.line, "unknown key '" + kv.key + "' in [search]");
    }
}

void apply_problem_key(ExperimentSpec& spec, const KeyValue& kv) {
    if (kv.key == "lambda") spec.lambda = parse_double(kv);
    else if (kv.key == "lambda1") spec.lambda1 = parse_double(kv);
    else if (kv.key == "lambda2") spec.lambda2 = parse_double(kv);
    else if (kv.key == "conservation_form") {
        if (kv.value == "scaled") spec.conservation_scaled = true;
        else if (kv.value == "plain") spec.conservation_scaled = false;
        else fail_at(kv.line, "conservation_form must be scaled or plain");
    } else if (kv.key == "batch_interior")
        spec.search.batch_sizes[0] = static_cast<std::size_t>(parse_int(kv));
    else if (kv.key == "batch_boundary")
        spec.search.batch_sizes[1] = static_cast<std::size_t>(parse_int(kv));
    else if (kv.key == "batch_initial")
        spec.search.batch_sizes[2] = static_cast<std::size_t>(parse_int(kv));
    else if (kv.key == "batch_constraint")
        spec.search.batch_sizes[3] = static_cast<std::size_t>(parse_int(kv));
    else
        fail_at(kv.line, "unknown key '" + kv.key + "' in [problem]");
}

void apply_expanding_key(ExperimentSpec& spec, const KeyValue& kv) {
    if (kv.key == "templates") {
        spec.expanding_templates.clear();
        for (const auto& name : split_list(kv.value))
            spec.expanding_templates.push_back(resolve_template_shape(name));
    } else if (kv.key == "tolerance") {
        spec.expanding_tolerance = parse_double(kv);
    } else {
        fail_at(kv.line, "unknown key '" + kv.key + "' in [expanding]");
    }
}

void apply_eigen_key(ExperimentSpec& spec, const KeyValue& kv) {
    if (kv.key == "G") spec.eigen.G = static_cast<int>(parse_int(kv));
    else if (kv.key == "rayleigh_batch")
        spec.eigen.rayleigh_batch = static_cast<std::size_t>(parse_int(kv));
    else
        fail_at(kv.line, "unknown key '" + kv.key + "' in [eigen]");
}

}  // namespace

ExperimentSpec validate_config(const std::string& text, const std::string& profile) {
    ExperimentSpec spec = profile_defaults(profile);
    for (const KeyValue& kv : parse_ini(text)) {
        if (kv.section == "experiment" || kv.section.empty()) apply_experiment_key(spec, kv);
        else if (kv.section == "search") apply_search_key(spec, kv);
        else if (kv.section == "problem") apply_problem_key(spec, kv);
        else if (kv.section == "expanding") apply_expanding_key(spec, kv);
        else if (kv.section == "eigen") apply_eigen_key(spec, kv);
        else fail_at(kv.line, "unknown section [" + kv.section + "]");
    }
    spec.validate();
    return spec;
}

ExperimentSpec load_config_file(const std::string& path, const std::string& profile) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return validate_config(buf.str(), profile);
}

namespace {

std::string ops_to_text(const OperatorSet& set) {
    std::string b, u;
    for (auto op : set.binary) {
        if (!b.empty()) b += ",";
        b += name_of(op);
    }
    for (auto op : set.unary) {
        if (!u.empty()) u += ",";
        u += name_of(op);
    }
    return "binary_ops = " + b + "\nunary_ops = " + u + "\n";
}

}  // namespace

std::string render_config(const ExperimentSpec& spec) {
    std::ostringstream out;
    out << "[experiment]\n";
    out << "problem = " << spec.problem << "\n";
    out << "dim = ";
    for (std::size_t i = 0; i < spec.dims.size(); ++i)
        out << (i ? "," : "") << spec.dims[i];
    out << "\n";
    out << "repetitions = " << spec.repetitions << "\n";
    out << "mode = " << name_of(spec.mode) << "\n";
    out << "seed = " << spec.search.seed << "\n";
    out << "threads = " << spec.search.threads << "\n";
    out << "output = " << spec.output_dir << "\n";
    out << "\n[search]\n";
    out << "T = " << spec.search.T << "\n";
    out << "N = " << spec.search.N << "\n";
    out << "K = " << spec.search.K << "\n";
    out << "T1 = " << spec.search.T1 << "\n";
    out << "T2 = " << spec.search.T2 << "\n";
    out << "T3 = " << spec.search.T3 << "\n";
    out << "epsilon = " << format_number(spec.search.epsilon) << "\n";
    out << "nu = " << format_number(spec.search.nu) << "\n";
    out << "risk_seeking = " << (spec.search.risk_seeking ? "true" : "false") << "\n";
    out << "controller_lr = " << format_number(spec.search.controller_lr) << "\n";
    out << "adam_lr = " << format_number(spec.search.coarse_adam_lr) << "\n";
    out << "bfgs_step = " << format_number(spec.search.bfgs_step) << "\n";
    out << "finetune_lr = " << format_number(spec.search.finetune_lr) << "\n";
    out << "finetune_schedule = "
        << (spec.search.finetune_schedule == LrSchedule::Kind::Cosine ? "cosine" : "constant")
        << "\n";
    out << "template = "
        << (spec.search.template_shape.empty() ? TreeTemplate::shape_for_depth(3)
                                               : spec.search.template_shape)
        << "\n";
    out << ops_to_text(spec.search.op_set);
    out << "controller_arch = "
        << (spec.search.controller.arch == ControllerConfig::Arch::Table ? "table" : "mlp") << "\n";
    out << "controller_hidden = " << spec.search.controller.hidden_width << "\n";
    out << "metric_batch = " << spec.search.metric_batch << "\n";
    // Materialized problem parameters: sentinels resolve to the problem's
    // own defaults so a report-embedded config reproduces the run as-is.
    PDEProblem resolved = spec.make_problem(spec.dims.front());
    const auto batches = spec.search.resolved_batches(resolved);
    out << "\n[problem]\n";
    if (spec.problem == "eigen") {
        out << "lambda1 = " << format_number(resolved.lambda1) << "\n";
        out << "lambda2 = " << format_number(resolved.lambda2) << "\n";
    } else {
        out << "lambda = " << format_number(resolved.lambda) << "\n";
    }
    if (spec.problem == "conservation")
        out << "conservation_form = " << (spec.conservation_scaled ? "scaled" : "plain") << "\n";
    out << "batch_interior = " << batches[0] << "\n";
    out << "batch_boundary = " << batches[1] << "\n";
    out << "batch_initial = " << batches[2] << "\n";
    out << "batch_constraint = " << batches[3] << "\n";
    if (spec.mode == RunMode::ExpandingTrees) {
        out << "\n[expanding]\n";
        out << "templates = ";
        for (std::size_t i = 0; i < spec.expanding_templates.size(); ++i)
            out << (i ? "," : "") << spec.expanding_templates[i];
        out << "\n";
        out << "tolerance = " << format_number(spec.expanding_tolerance) << "\n";
    }
    if (spec.mode == RunMode::EigenIterative) {
        out << "\n[eigen]\n";
        out << "G = " << spec.eigen.G << "\n";
        out << "rayleigh_batch = " << spec.eigen.rayleigh_batch << "\n";
    }
    return out.str();
}

}  // namespace xpde
