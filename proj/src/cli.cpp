#include <mivs/cli.hpp>
#include <mivs/csv.hpp>
#include <mivs/error.hpp>
#include <mivs/parallel.hpp>
#include <mivs/simulation.hpp>
#include <mivs/tuning.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#ifndef MIVS_VERSION
#define MIVS_VERSION "0.0.0"
#endif

namespace mivs::cli {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Tuning flags shared by fit and simulate.
struct TuningFlags
{
    int folds = kDefaultFolds;
    int grid_size = kDefaultGridSize;
    double lambda_min_ratio = 0.0;
    CLI::Option* ratio_opt = nullptr;

    void add(CLI::App& app)
    {
        app.add_option("--folds", folds, "Cross-validation folds")->check(CLI::Range(2, 1000000))->capture_default_str();
        app.add_option("--grid-size", grid_size, "Lambda values per path")
            ->check(CLI::Range(2, 100000))
            ->capture_default_str();
        ratio_opt = app.add_option("--lambda-min-ratio", lambda_min_ratio,
                                   "Smallest lambda over lambda_max (default 1e-3, 1e-6 for adaptive methods)")
                        ->check(CLI::Range(1e-300, 1.0));
    }

    TuningOptions options() const
    {
        TuningOptions o;
        o.folds = folds;
        o.grid_size = grid_size;
        if (ratio_opt->count()) o.lambda_min_ratio = lambda_min_ratio;
        return o;
    }

    json to_json(const TuningOptions& o) const
    {
        json j{{"folds", o.folds}, {"grid_size", o.grid_size}, {"alphas", o.alphas}};
        if (o.lambda_min_ratio) j["lambda_min_ratio"] = *o.lambda_min_ratio;
        else j["lambda_min_ratio"] = "default";
        return j;
    }
};

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
}

std::ofstream open_output(const std::string& dir, const std::string& name)
{
    const auto path = (fs::path(dir) / name).string();
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    return out;
}

json input_entry(const std::string& role, const std::string& path)
{
    return {{"role", role}, {"path", path}, {"sha256", sha256_file(path)}};
}

void write_manifest(const std::string& dir, const std::string& command, const std::vector<std::string>& args,
                    std::uint64_t seed, json config, json inputs, json outputs, json result, double total_s)
{
    json m;
    m["schema_version"] = kManifestSchema;
    m["software"] = {{"name", "mivs"}, {"version", MIVS_VERSION}};
    m["command"] = command;
    m["argv"] = args;
    m["seed"] = seed;
    m["config"] = std::move(config);
    m["inputs"] = std::move(inputs);
    m["outputs"] = std::move(outputs);
    m["result"] = std::move(result);
    m["timings"] = {{"total_s", total_s}};
    auto out = open_output(dir, "manifest.json");
    out << m.dump(2) << '\n';
}

std::string stage_name(const StageRecord& s)
{
    return s.method.name();
}

// ---------------------------------------------------------------- fit

struct FitArgs
{
    std::string input;
    std::string mask;
    std::string method;
    double alpha = 1.0;
    double lambda = 0.0;
    bool cv = false;
    std::string weights = "equal";
    std::uint64_t seed = 1;
    int threads = default_thread_count();
    std::string out_dir = ".";
    std::string imputation_column = "imputation_id";
    std::string subject_column = "subject_id";
    std::string outcome_column = "y";
    TuningFlags tuning;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* lambda_opt = nullptr;
    CLI::Option* weights_opt = nullptr;
};

int cmd_fit(const FitArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    const auto start = Clock::now();
    Method method = parse_method(a.method);
    if (a.weights_opt->count()) {
        const bool observed = a.weights == "observed";
        if (observed && method.grouped()) throw InputError("grouped methods do not take observation weights");
        if (!observed && method.scheme == WeightScheme::FractionObserved)
            throw InputError("--weights equal conflicts with method " + a.method);
        if (observed) method.scheme = WeightScheme::FractionObserved;
    }
    if (a.cv == static_cast<bool>(a.lambda_opt->count()))
        throw InputError("give exactly one of --lambda or --cv");
    if (a.alpha_opt->count() && !method.tunes_alpha())
        throw InputError("--alpha applies only to senet and saenet");
    if (a.alpha_opt->count() && a.cv) throw InputError("--alpha is tuned by --cv; give it only with --lambda");

    CsvLayout layout;
    layout.imputation_column = a.imputation_column;
    layout.subject_column = a.subject_column;
    layout.outcome_column = a.outcome_column;
    if (!a.mask.empty()) layout.mask_path = a.mask;
    const auto set = load_csv(a.input, layout);

    TuningOptions options = a.tuning.options();
    options.seed = a.seed;
    options.threads = a.threads;
    std::optional<FixedTuning> fixed;
    if (!a.cv) {
        fixed = FixedTuning{a.lambda, std::nullopt};
        if (a.alpha_opt->count()) fixed->alpha = a.alpha;
    }

    const MethodFit fit = fit_method(set, method, options, fixed);
    ensure_dir(a.out_dir);

    const auto original = fit.original_estimate();
    const Eigen::VectorXd standardized = fit.standardized_estimate();
    const auto selected = fit.selected();
    const auto& names = set.covariate_names();
    std::optional<Eigen::MatrixXd> per_imputation;
    if (method.grouped()) per_imputation = fit.per_imputation_original();
    {
        auto f = open_output(a.out_dir, "coefficients.csv");
        f << "covariate,estimate_standardized,estimate_original,selected";
        if (per_imputation)
            for (int d = 0; d < set.D(); ++d) f << ",estimate_original_imp" << d + 1;
        f << '\n';
        for (int j = 0; j < set.p(); ++j) {
            f << names[j] << ',' << csv::format(standardized[j]) << ',' << csv::format(original.beta[j]) << ','
              << (selected[j] ? 1 : 0);
            if (per_imputation)
                for (int d = 0; d < set.D(); ++d) f << ',' << csv::format((*per_imputation)(d, j));
            f << '\n';
        }
    }
    json outputs = json::array({"coefficients.csv"});
    const bool any_cv = std::any_of(fit.stages.begin(), fit.stages.end(), [](const auto& s) { return s.cv.has_value(); });
    if (any_cv) {
        auto f = open_output(a.out_dir, "cv_path.csv");
        f << "stage,method,alpha,lambda,grid_index,mean_error,se,selected\n";
        for (std::size_t s = 0; s < fit.stages.size(); ++s) {
            const auto& stage = fit.stages[s];
            if (!stage.cv) continue;
            for (std::size_t c = 0; c < stage.cv->candidates.size(); ++c) {
                const auto& cand = stage.cv->candidates[c];
                f << s + 1 << ',' << stage_name(stage) << ',' << csv::format(cand.alpha) << ','
                  << csv::format(cand.lambda) << ',' << cand.index << ',' << csv::format(cand.mean_error) << ','
                  << csv::format(cand.se) << ',' << (static_cast<int>(c) == stage.cv->selected ? 1 : 0) << '\n';
            }
        }
        outputs.push_back("cv_path.csv");
    }
    outputs.push_back("manifest.json");

    json stages = json::array();
    for (const auto& s : fit.stages) {
        json j{{"method", stage_name(s)}, {"alpha", s.alpha}, {"lambda", s.lambda}, {"tuned", s.cv.has_value()}};
        if (s.penalty.adaptive) j["gamma"] = s.penalty.gamma;
        if (!s.grids.empty()) j["lambda_max"] = s.grids.front().lambda_max;
        if (s.cv) j["rule"] = s.cv->rule;
        stages.push_back(std::move(j));
    }
    json config{{"method", method.name()},
                {"weights", method.scheme == WeightScheme::FractionObserved ? "observed" : "equal"},
                {"family", set.detect_family() == Family::Binomial ? "binomial" : "gaussian"},
                {"mode", a.cv ? "cv" : "fixed"},
                {"tuning", a.tuning.to_json(options)},
                {"threads", a.threads},
                {"columns", {{"imputation", a.imputation_column}, {"subject", a.subject_column}, {"outcome", a.outcome_column}}},
                {"n", set.n()},
                {"p", set.p()},
                {"D", set.D()}};
    if (!a.cv) {
        config["lambda"] = a.lambda;
        if (a.alpha_opt->count()) config["alpha"] = a.alpha;
    }
    json inputs = json::array({input_entry("data", a.input)});
    if (!a.mask.empty()) inputs.push_back(input_entry("mask", a.mask));
    json result{{"stages", stages},
                {"converged", fit.converged()},
                {"intercept_original", original.intercept},
                {"selected", std::count(selected.begin(), selected.end(), true)}};
    write_manifest(a.out_dir, "fit", args, a.seed, config, inputs, outputs, result, seconds_since(start));

    const auto& last = fit.stages.back();
    out << method.name() << ": lambda=" << csv::format(last.lambda);
    if (method.tunes_alpha()) out << " alpha=" << csv::format(last.alpha);
    out << " selected=" << std::count(selected.begin(), selected.end(), true) << "/" << set.p() << '\n';
    if (!fit.converged()) {
        err << "error: solver did not converge; outputs written but should not be trusted\n";
        return kExitNumerical;
    }
    return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs
{
    std::string case_spec;
    std::string methods = "slasso,salasso,senet,saenet,slasso:w,salasso:w,senet:w,saenet:w,glasso,galasso";
    int reps = 0;
    int imputations = 0;
    bool paper_scale = false;
    std::uint64_t seed = 1;
    int threads = default_thread_count();
    bool no_runtime = false;
    std::string out_dir = ".";
    TuningFlags tuning;
    CLI::Option* reps_opt = nullptr;
    CLI::Option* imputations_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
};

SimulationCaseConfig resolve_case(const std::string& spec, std::string& config_path)
{
    if (spec.size() == 1 && spec[0] >= '0' && spec[0] <= '9') return case_preset(spec[0] - '0');
    if (spec.rfind("case", 0) == 0 && spec.size() == 5) return case_preset(spec[4] - '0');
    if (!fs::exists(spec)) throw InputError("invalid case '" + spec + "': expected 1-4 or a config file");
    config_path = spec;
    return load_case_config(spec);
}

std::vector<Method> parse_methods(const std::string& list)
{
    std::vector<Method> methods;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const Method m = parse_method(item);
        if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
    }
    if (methods.empty()) throw InputError("no methods given");
    return methods;
}

json case_to_json(const SimulationCaseConfig& c)
{
    auto one_based = [](const std::vector<int>& idx) {
        std::vector<int> out;
        for (int j : idx) out.push_back(j + 1);
        return out;
    };
    json blocks = json::array(), groups = json::array(), beta = json::object();
    for (const auto& b : c.blocks) blocks.push_back({{"indices", one_based(b.indices)}, {"rho", b.rho}});
    for (const auto& g : c.missingness) groups.push_back({{"indices", one_based(g.indices)}, {"rate", g.rate}});
    for (int j = 0; j < c.p; ++j)
        if (c.beta_true[j] != 0.0) beta[std::to_string(j + 1)] = c.beta_true[j];
    return {{"name", c.name},          {"n", c.n},
            {"p", c.p},                {"blocks", blocks},
            {"beta", beta},            {"beta0", c.beta0},
            {"missingness", groups},   {"mar_covariate_coef", c.mar_covariate_coef},
            {"mar_outcome_coef", c.mar_outcome_coef}, {"imputations", c.D},
            {"replications", c.R},     {"seed", c.seed}};
}

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    const auto start = Clock::now();
    std::string config_path;
    SimulationCaseConfig config = resolve_case(a.case_spec, config_path);
    if (a.paper_scale) {
        config.R = 1000;
        config.D = 10;
    }
    if (a.reps_opt->count()) config.R = a.reps;
    if (a.imputations_opt->count()) config.D = a.imputations;
    if (a.seed_opt->count()) config.seed = a.seed;
    config.validate();

    StudyOptions options;
    options.methods = parse_methods(a.methods);
    options.tuning = a.tuning.options();
    options.threads = a.threads;
    options.tuning.threads = 1;
    options.record_runtime = !a.no_runtime;
    const StudyResult result = run_study(config, options);

    ensure_dir(a.out_dir);
    {
        auto f = open_output(a.out_dir, "replications.csv");
        write_replications_csv(f, result);
    }
    {
        auto f = open_output(a.out_dir, "summary.csv");
        write_summary_csv(f, result);
    }
    {
        auto f = open_output(a.out_dir, "failures.csv");
        f << "case,replication,method,message\n";
        for (const auto& fail : result.failures) {
            std::string msg = fail.message;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            f << config.name << ',' << fail.replication << ',' << fail.method << ',' << msg << '\n';
        }
    }
    {
        auto f = open_output(a.out_dir, "truth.csv");
        f << "covariate,beta\n";
        for (int j = 0; j < config.p; ++j) f << 'x' << j + 1 << ',' << csv::format(config.beta_true[j]) << '\n';
    }
    std::vector<std::string> method_names;
    for (const auto& m : options.methods) method_names.push_back(m.name());
    json cfg{{"case", case_to_json(config)},
             {"methods", method_names},
             {"tuning", a.tuning.to_json(options.tuning)},
             {"pmm", {{"donors", options.pmm.donors}, {"cycles", options.pmm.cycles},
                      {"min_observed", options.pmm.min_observed}, {"ridge", options.pmm.ridge}}},
             {"calibration_draws", options.calibration_draws},
             {"threads", a.threads},
             {"record_runtime", options.record_runtime}};
    json inputs = json::array();
    if (!config_path.empty()) inputs.push_back(input_entry("case_config", config_path));
    json mar = json::array();
    for (std::size_t g = 0; g < result.mar.groups.size(); ++g)
        mar.push_back({{"rate", result.mar.groups[g].rate},
                       {"intercept", std::isfinite(result.mar.intercepts[g]) ? json(result.mar.intercepts[g]) : json("-inf")}});
    json res{{"rows", result.rows.size()}, {"failures", result.failures.size()}, {"mar_intercepts", mar}};
    write_manifest(a.out_dir, "simulate", args, config.seed, cfg, inputs,
                   json::array({"replications.csv", "summary.csv", "failures.csv", "truth.csv", "manifest.json"}), res,
                   seconds_since(start));

    write_summary_csv(out, result);
    if (!result.failures.empty())
        err << "warning: " << result.failures.size() << " failed replication(s); see failures.csv\n";
    return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs
{
    std::vector<std::string> estimates;
    std::string truth;
    std::string out_dir = ".";
};

std::map<std::string, double> read_named_values(const std::string& path, const std::vector<std::string>& candidates,
                                                std::vector<std::string>& order)
{
    const auto table = csv::read(path);
    const int name_col = table.column("covariate");
    if (name_col < 0) throw InputError(path + ": missing column 'covariate'");
    int value_col = -1;
    for (const auto& c : candidates) {
        value_col = table.column(c);
        if (value_col >= 0) break;
    }
    if (value_col < 0) throw InputError(path + ": no value column (expected one of " + candidates.front() + ", ...)");
    std::map<std::string, double> values;
    for (const auto& row : table.rows) {
        const auto& name = row[name_col];
        if (name == "(intercept)") continue;
        if (!values.emplace(name, csv::to_double(row[value_col], path + ": " + name)).second)
            throw InputError(path + ": duplicate covariate " + name);
        order.push_back(name);
    }
    return values;
}

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream&)
{
    const auto start = Clock::now();
    std::vector<std::string> order;
    const auto truth = read_named_values(a.truth, {"beta", "value", "estimate"}, order);
    Eigen::VectorXd beta(order.size());
    for (std::size_t j = 0; j < order.size(); ++j) beta[j] = truth.at(order[j]);

    std::vector<ReplicationMetrics> metrics;
    json inputs = json::array({input_entry("truth", a.truth)});
    for (const auto& path : a.estimates) {
        std::vector<std::string> est_order;
        const auto est = read_named_values(path, {"estimate_original", "estimate", "beta"}, est_order);
        Eigen::VectorXd e(order.size());
        for (std::size_t j = 0; j < order.size(); ++j) {
            auto it = est.find(order[j]);
            if (it == est.end()) throw InputError(path + ": covariate " + order[j] + " missing from estimates");
            e[j] = it->second;
        }
        for (const auto& name : est_order)
            if (!truth.count(name)) throw InputError(path + ": covariate " + name + " not in the truth file");
        auto m = score_replication(e, beta);
        m.method = path;
        metrics.push_back(m);
        inputs.push_back(input_entry("estimates", path));
    }

    ensure_dir(a.out_dir);
    std::ostringstream table;
    table << "estimates,sens,spec,mse_nonnull,mse_null\n";
    for (const auto& m : metrics)
        table << m.method << ',' << csv::format(m.sens) << ',' << csv::format(m.spec) << ','
              << csv::format(m.mse_nonnull) << ',' << csv::format(m.mse_null) << '\n';
    open_output(a.out_dir, "metrics.csv") << table.str();
    write_manifest(a.out_dir, "evaluate", args, 0, json{{"files", a.estimates.size()}}, inputs,
                   json::array({"metrics.csv", "manifest.json"}), json::object(), seconds_since(start));
    out << table.str();
    return kExitOk;
}

// ---------------------------------------------------------------- replay

struct ReplayArgs
{
    std::string manifest;
    std::string out_dir;
};

int cmd_replay(const ReplayArgs& a, std::ostream& out, std::ostream& err)
{
    std::ifstream in(a.manifest);
    if (!in) throw InputError("cannot open " + a.manifest);
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw InputError(a.manifest + ": " + e.what());
    }
    if (m.value("schema_version", -1) != kManifestSchema)
        throw InputError(a.manifest + ": unsupported manifest schema");
    auto argv = m.at("argv").get<std::vector<std::string>>();
    if (argv.empty() || argv.front() == "replay") throw InputError(a.manifest + ": nothing to replay");
    for (const auto& input : m.at("inputs")) {
        const auto path = input.at("path").get<std::string>();
        if (sha256_file(path) != input.at("sha256").get<std::string>())
            throw InputError("input " + path + " changed since the manifest was written");
    }
    if (!a.out_dir.empty()) {
        auto it = std::find(argv.begin(), argv.end(), "--out-dir");
        if (it != argv.end() && std::next(it) != argv.end()) {
            *std::next(it) = a.out_dir;
        } else {
            argv.push_back("--out-dir");
            argv.push_back(a.out_dir);
        }
    }
    return run(argv, out, err);
}

} // namespace

std::string sha256_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    char buf[1 << 15];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
        s += hex[digest[i] >> 4];
        s += hex[digest[i] & 15];
    }
    return s;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Variable selection on multiply imputed data", "mivs"};
    app.set_version_flag("--version", MIVS_VERSION);
    app.require_subcommand(1);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit one method to stacked imputation data");
    fit_cmd->add_option("input", fit.input, "CSV with imputation_id, subject_id, outcome and covariates")
        ->required()
        ->check(CLI::ExistingFile);
    fit_cmd->add_option("--mask", fit.mask, "CSV of missingness indicators (subject_id + covariates)")
        ->check(CLI::ExistingFile);
    fit_cmd->add_option("--method", fit.method, "slasso, salasso, senet, saenet (optionally :w), glasso, galasso")
        ->required();
    fit.alpha_opt = fit_cmd->add_option("--alpha", fit.alpha, "Elastic-net mixing with --lambda")->check(CLI::Range(0.0, 1.0));
    fit.lambda_opt = fit_cmd->add_option("--lambda", fit.lambda, "Fixed penalty level")->check(CLI::NonNegativeNumber);
    fit_cmd->add_flag("--cv", fit.cv, "Tune by cross-validation with the one-SE rule");
    fit.weights_opt = fit_cmd->add_option("--weights", fit.weights, "Observation weights for stacked methods")
                          ->check(CLI::IsMember({"equal", "observed"}));
    fit_cmd->add_option("--seed", fit.seed, "Fold assignment seed")->capture_default_str();
    fit_cmd->add_option("--threads", fit.threads, "Worker threads")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--out-dir", fit.out_dir, "Output directory")->capture_default_str();
    fit_cmd->add_option("--imputation-column", fit.imputation_column)->capture_default_str();
    fit_cmd->add_option("--subject-column", fit.subject_column)->capture_default_str();
    fit_cmd->add_option("--outcome-column", fit.outcome_column)->capture_default_str();
    fit.tuning.add(*fit_cmd);

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Run the simulation study");
    sim_cmd->add_option("--case", sim.case_spec, "1-4 or a JSON case config")->required();
    sim_cmd->add_option("--methods", sim.methods, "Comma separated method list")->capture_default_str();
    sim.reps_opt = sim_cmd->add_option("--reps", sim.reps, "Replications (default 50)")->check(CLI::PositiveNumber);
    sim.imputations_opt =
        sim_cmd->add_option("--imputations", sim.imputations, "Imputations per replication (default 5)")
            ->check(CLI::PositiveNumber);
    sim_cmd->add_flag("--paper-scale", sim.paper_scale, "1000 replications with 10 imputations");
    sim.seed_opt = sim_cmd->add_option("--seed", sim.seed, "Study seed");
    sim_cmd->add_option("--threads", sim.threads, "Concurrent replications")->check(CLI::PositiveNumber);
    sim_cmd->add_flag("--no-runtime", sim.no_runtime, "Write 0 for runtimes so reruns are byte-identical");
    sim_cmd->add_option("--out-dir", sim.out_dir, "Output directory")->capture_default_str();
    sim.tuning.add(*sim_cmd);

    EvaluateArgs eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score coefficient estimates against known truth");
    eval_cmd->add_option("--estimates", eval.estimates, "Estimate CSV(s): covariate + estimate_original or estimate")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--truth", eval.truth, "Truth CSV: covariate + beta")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--out-dir", eval.out_dir, "Output directory")->capture_default_str();

    ReplayArgs replay;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay_cmd->add_option("manifest", replay.manifest)->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--out-dir", replay.out_dir, "Write outputs here instead");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, r;
        const int code = app.exit(e, o, r);
        out << o.str();
        err << r.str();
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit, args, out, err);
        if (*sim_cmd) return cmd_simulate(sim, args, out, err);
        if (*eval_cmd) return cmd_evaluate(eval, args, out, err);
        return cmd_replay(replay, out, err);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

} // namespace mivs::cli
