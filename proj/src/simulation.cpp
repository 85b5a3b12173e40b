#include <mivs/csv.hpp>
#include <mivs/error.hpp>
#include <mivs/glm.hpp>
#include <mivs/parallel.hpp>
#include <mivs/simulation.hpp>

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>

namespace mivs {
namespace {

std::vector<int> range(int first, int last) // 1-based inclusive -> 0-based
{
    std::vector<int> out;
    for (int j = first; j <= last; ++j) out.push_back(j - 1);
    return out;
}

Eigen::VectorXd sparse_beta(int p, std::initializer_list<std::pair<int, double>> entries)
{
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (auto [j, v] : entries) beta[j - 1] = v;
    return beta;
}

Eigen::MatrixXd block_correlation(std::size_t k, double rho)
{
    Eigen::MatrixXd c = Eigen::MatrixXd::Constant(k, k, rho);
    c.diagonal().setOnes();
    return c;
}

} // namespace

int SimulationCaseConfig::signals() const
{
    return static_cast<int>((beta_true.array() != 0.0).count());
}

void SimulationCaseConfig::validate() const
{
    if (n < 2) throw InputError("case " + name + ": n must be at least 2");
    if (p < 2) throw InputError("case " + name + ": p must be at least 2");
    if (beta_true.size() != p) throw InputError("case " + name + ": beta has length " +
                                                std::to_string(beta_true.size()) + ", expected " + std::to_string(p));
    if (!beta_true.allFinite() || !std::isfinite(beta0)) throw InputError("case " + name + ": non-finite coefficient");
    if (D < 1) throw InputError("case " + name + ": at least one imputation is required");
    if (R < 1) throw InputError("case " + name + ": at least one replication is required");
    auto check_index = [&](int j, const char* what) {
        if (j < 0 || j >= p) throw InputError("case " + name + ": " + what + " index " + std::to_string(j + 1) +
                                              " outside 1.." + std::to_string(p));
    };
    std::set<int> seen;
    for (const auto& block : blocks) {
        if (!(block.rho > -1.0 && block.rho < 1.0)) throw InputError("case " + name + ": block correlation outside (-1, 1)");
        for (int j : block.indices) {
            check_index(j, "block");
            if (!seen.insert(j).second) throw InputError("case " + name + ": covariate " + std::to_string(j + 1) +
                                                         " appears in more than one block");
        }
        if (block.rho < 0.0) {
            Eigen::LLT<Eigen::MatrixXd> llt(block_correlation(block.indices.size(), block.rho));
            if (llt.info() != Eigen::Success) throw InputError("case " + name + ": block correlation is not positive definite");
        }
    }
    std::set<int> grouped;
    for (const auto& group : missingness) {
        if (!(group.rate >= 0.0 && group.rate < 1.0)) throw InputError("case " + name + ": missing rate outside [0, 1)");
        for (int j : group.indices) {
            check_index(j, "missingness");
            if (j == driver()) throw InputError("case " + name + ": the last covariate must stay fully observed");
            if (!grouped.insert(j).second) throw InputError("case " + name + ": covariate " + std::to_string(j + 1) +
                                                            " appears in more than one missingness group");
        }
    }
}

SimulationCaseConfig case_preset(int id)
{
    SimulationCaseConfig c;
    c.name = "case" + std::to_string(id);
    if (id == 1 || id == 2) {
        c.n = 500;
        c.p = 20;
        c.blocks = {{range(1, 3), 0.9}, {range(6, 8), 0.5}, {range(11, 13), 0.3}};
        c.missingness = {{range(1, 5), 0.25}, {range(6, 13), 0.35}, {range(14, 17), 0.45}, {range(18, 19), 0.55}};
        c.beta_true = id == 1 ? sparse_beta(20, {{1, 2.0}, {4, 1.5}, {7, 1.5}, {11, 1.0}, {14, 1.0}})
                              : sparse_beta(20, {{1, 2.0}, {2, 1.0}, {4, 2.0}, {7, 1.0}, {11, 1.0}});
    } else if (id == 3 || id == 4) {
        c.n = 1000;
        c.p = 100;
        c.blocks = {{range(1, 6), 0.9}, {range(11, 16), 0.5}, {range(21, 26), 0.3}};
        c.missingness = {{range(1, 30), 0.25}, {range(31, 60), 0.35}, {range(61, 82), 0.45},
                         {range(83, 95), 0.55}, {range(96, 99), 0.60}};
        c.beta_true = id == 3 ? sparse_beta(100, {{2, 2.0}, {7, 0.8}, {9, 0.8}, {12, 0.5}, {17, 1.5},
                                                  {27, 1.0}, {37, 0.8}, {47, 0.4}, {48, 1.0}, {49, 1.0}})
                              : sparse_beta(100, {{1, 1.2}, {2, 0.8}, {3, 0.4}, {4, 0.4}, {12, 1.2},
                                                  {13, 1.0}, {17, 1.2}, {27, 1.0}, {37, 1.0}, {47, 1.0}});
    } else {
        throw InputError("unknown case " + std::to_string(id) + " (expected 1-4)");
    }
    return c;
}

SimulationCaseConfig parse_case_config(std::istream& in, const std::string& source_name)
{
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(source_name + ": " + e.what());
    }
    if (!j.is_object()) throw InputError(source_name + ": expected a JSON object");
    try {
        SimulationCaseConfig c = j.contains("base_case") ? case_preset(j.at("base_case").get<int>()) : SimulationCaseConfig{};
        if (j.contains("name")) c.name = j.at("name").get<std::string>();
        if (j.contains("n")) c.n = j.at("n").get<int>();
        if (j.contains("p")) c.p = j.at("p").get<int>();
        auto indices = [&](const nlohmann::json& list) {
            std::vector<int> out;
            for (const auto& v : list) out.push_back(v.get<int>() - 1);
            return out;
        };
        if (j.contains("blocks")) {
            c.blocks.clear();
            for (const auto& b : j.at("blocks")) c.blocks.push_back({indices(b.at("indices")), b.at("rho").get<double>()});
        }
        if (j.contains("missingness")) {
            c.missingness.clear();
            for (const auto& g : j.at("missingness"))
                c.missingness.push_back({indices(g.at("indices")), g.at("rate").get<double>()});
        }
        if (j.contains("beta")) {
            c.beta_true = Eigen::VectorXd::Zero(c.p);
            for (const auto& [key, value] : j.at("beta").items()) {
                const int idx = std::stoi(key);
                if (idx < 1 || idx > c.p) throw InputError(source_name + ": beta index " + key + " outside 1.." + std::to_string(c.p));
                c.beta_true[idx - 1] = value.get<double>();
            }
        } else if (c.beta_true.size() != c.p) {
            throw InputError(source_name + ": beta must be given unless it comes from a base case with the same p");
        }
        if (j.contains("beta0")) c.beta0 = j.at("beta0").get<double>();
        if (j.contains("mar_covariate_coef")) c.mar_covariate_coef = j.at("mar_covariate_coef").get<double>();
        if (j.contains("mar_outcome_coef")) c.mar_outcome_coef = j.at("mar_outcome_coef").get<double>();
        if (j.contains("imputations")) c.D = j.at("imputations").get<int>();
        if (j.contains("replications")) c.R = j.at("replications").get<int>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(source_name + ": " + e.what());
    } catch (const std::invalid_argument&) {
        throw InputError(source_name + ": beta keys must be covariate numbers");
    }
}

SimulationCaseConfig load_case_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return parse_case_config(in, path);
}

Eigen::MatrixXd generate_covariates(const SimulationCaseConfig& config, int n, Rng& rng)
{
    const int p = config.p;
    std::normal_distribution<double> normal;
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = normal(rng);
    for (const auto& block : config.blocks) {
        const auto k = static_cast<Eigen::Index>(block.indices.size());
        if (block.rho >= 0.0) {
            const double a = std::sqrt(block.rho), b = std::sqrt(1.0 - block.rho);
            for (int i = 0; i < n; ++i) {
                const double shared = normal(rng);
                for (int j : block.indices) X(i, j) = a * shared + b * X(i, j);
            }
        } else {
            Eigen::LLT<Eigen::MatrixXd> llt(block_correlation(k, block.rho));
            if (llt.info() != Eigen::Success) throw InputError("block correlation is not positive definite");
            const Eigen::MatrixXd L = llt.matrixL();
            Eigen::VectorXd z(k);
            for (int i = 0; i < n; ++i) {
                for (Eigen::Index t = 0; t < k; ++t) z[t] = X(i, block.indices[t]);
                const Eigen::VectorXd x = L * z;
                for (Eigen::Index t = 0; t < k; ++t) X(i, block.indices[t]) = x[t];
            }
        }
    }
    return X;
}

Eigen::VectorXd generate_outcome(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta, double beta0, Rng& rng)
{
    if (X.cols() != beta.size()) throw InputError("coefficient length does not match the design");
    std::uniform_real_distribution<double> unif;
    const Eigen::VectorXd eta = (X * beta).array() + beta0;
    Eigen::VectorXd y(X.rows());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = unif(rng) < glm::sigmoid(eta[i]) ? 1.0 : 0.0;
    return y;
}

double solve_mar_intercept(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double target, double covariate_coef,
                           double outcome_coef)
{
    if (!(target >= 0.0 && target < 1.0)) throw InputError("missing rate outside [0, 1)");
    if (target == 0.0) return -std::numeric_limits<double>::infinity();
    const Eigen::ArrayXd base = covariate_coef * x.array() + outcome_coef * y.array();
    auto rate = [&](double a0) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < base.size(); ++i) s += glm::sigmoid(a0 + base[i]);
        return s / static_cast<double>(base.size());
    };
    double lo = -50.0, hi = 50.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        (rate(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

MarModel calibrate_mar(const SimulationCaseConfig& config, std::uint64_t seed, int draws)
{
    config.validate();
    Rng rng(derive_seed(seed, 0xca11b));
    const Eigen::MatrixXd X = generate_covariates(config, draws, rng);
    const Eigen::VectorXd y = generate_outcome(X, config.beta_true, config.beta0, rng);
    MarModel model;
    model.groups = config.missingness;
    model.covariate_coef = config.mar_covariate_coef;
    model.outcome_coef = config.mar_outcome_coef;
    model.driver = config.driver();
    const Eigen::VectorXd driver = X.col(model.driver);
    for (const auto& g : model.groups)
        model.intercepts.push_back(solve_mar_intercept(driver, y, g.rate, model.covariate_coef, model.outcome_coef));
    return model;
}

MaskMatrix impose_mar(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const MarModel& model, Rng& rng)
{
    if (y.size() != X.rows()) throw InputError("outcome length does not match the design");
    if (model.driver < 0 || model.driver >= X.cols()) throw InputError("missingness driver outside the design");
    MaskMatrix mask = MaskMatrix::Constant(X.rows(), X.cols(), false);
    std::uniform_real_distribution<double> unif;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (std::size_t g = 0; g < model.groups.size(); ++g) {
            const double u = unif(rng);
            if (!std::isfinite(model.intercepts[g])) continue;
            const double prob =
                glm::sigmoid(model.intercepts[g] + model.covariate_coef * X(i, model.driver) + model.outcome_coef * y[i]);
            if (u < prob)
                for (int j : model.groups[g].indices) mask(i, j) = true;
        }
    }
    return mask;
}

ReplicationMetrics score_replication(const Eigen::VectorXd& estimate, const Eigen::VectorXd& beta_true)
{
    if (estimate.size() != beta_true.size()) throw InputError("estimate length does not match the truth");
    ReplicationMetrics m;
    int T = 0, F = 0, hit = 0, excluded = 0;
    for (Eigen::Index j = 0; j < estimate.size(); ++j) {
        const double err = estimate[j] - beta_true[j];
        if (beta_true[j] != 0.0) {
            ++T;
            hit += estimate[j] != 0.0;
            m.mse_nonnull += err * err;
        } else {
            ++F;
            excluded += estimate[j] == 0.0;
            m.mse_null += err * err;
        }
    }
    // Vacuous rates are 1.
    m.sens = T > 0 ? static_cast<double>(hit) / T : 1.0;
    m.spec = F > 0 ? static_cast<double>(excluded) / F : 1.0;
    return m;
}

SimulatedData simulate_replication(const SimulationCaseConfig& config, const MarModel& mar, int replication,
                                   const PmmOptions& pmm)
{
    const auto r = static_cast<std::uint64_t>(replication);
    Rng gen(derive_seed(config.seed, r, 1));
    Eigen::MatrixXd X = generate_covariates(config, config.n, gen);
    Eigen::VectorXd y = generate_outcome(X, config.beta_true, config.beta0, gen);
    Rng miss(derive_seed(config.seed, r, 2));
    MaskMatrix mask = impose_mar(X, y, mar, miss);
    Rng imp(derive_seed(config.seed, r, 3));
    auto imputed = impute_pmm(X, mask, y, config.D, pmm, imp);
    return {std::move(X), std::move(y), std::move(mask), std::move(imputed)};
}

StudyResult run_study(const SimulationCaseConfig& config, const StudyOptions& options)
{
    config.validate();
    if (options.methods.empty()) throw InputError("no methods to run");
    StudyResult result;
    result.config = config;
    result.mar = calibrate_mar(config, config.seed, options.calibration_draws);

    const std::size_t M = options.methods.size();
    struct Slot
    {
        std::vector<std::optional<ReplicationMetrics>> metrics;
        std::vector<ReplicationFailure> failures;
    };
    std::vector<Slot> slots(config.R);
    parallel_for(static_cast<std::size_t>(config.R), options.threads, [&](std::size_t r) {
        Slot& slot = slots[r];
        slot.metrics.assign(M, std::nullopt);
        const int rep = static_cast<int>(r) + 1;
        std::optional<SimulatedData> data;
        try {
            data.emplace(simulate_replication(config, result.mar, rep, options.pmm));
        } catch (const std::exception& e) {
            slot.failures.push_back({rep, "", e.what()});
            return;
        }
        for (std::size_t m = 0; m < M; ++m) {
            const Method& method = options.methods[m];
            TuningOptions tuning = options.tuning;
            tuning.seed = derive_seed(config.seed, static_cast<std::uint64_t>(rep), 4);
            try {
                const auto start = std::chrono::steady_clock::now();
                const MethodFit fit = fit_method(data->imputed, method, tuning);
                const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                ReplicationMetrics metrics = score_replication(fit.original_estimate().beta, config.beta_true);
                metrics.method = method.name();
                metrics.replication = rep;
                metrics.runtime_s = options.record_runtime ? elapsed : 0.0;
                slot.metrics[m] = metrics;
            } catch (const std::exception& e) {
                slot.failures.push_back({rep, method.name(), e.what()});
            }
        }
    });

    for (const auto& slot : slots) {
        for (const auto& m : slot.metrics)
            if (m) result.rows.push_back(*m);
        result.failures.insert(result.failures.end(), slot.failures.begin(), slot.failures.end());
    }
    for (const auto& method : options.methods) {
        MethodSummary s;
        s.method = method.name();
        for (const auto& row : result.rows) {
            if (row.method != s.method) continue;
            ++s.replications;
            s.sens += row.sens;
            s.spec += row.spec;
            s.mse_nonnull += row.mse_nonnull;
            s.mse_null += row.mse_null;
            s.runtime_s += row.runtime_s;
        }
        for (const auto& f : result.failures) s.failures += f.method.empty() || f.method == s.method;
        if (s.replications > 0) {
            const double k = s.replications;
            s.sens /= k;
            s.spec /= k;
            s.mse_nonnull /= k;
            s.mse_null /= k;
            s.runtime_s /= k;
        } else {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            s.sens = s.spec = s.mse_nonnull = s.mse_null = s.runtime_s = nan;
        }
        result.summary.push_back(s);
    }
    return result;
}

void write_replications_csv(std::ostream& out, const StudyResult& result)
{
    out << "case,method,replication,sens,spec,mse_nonnull,mse_null,runtime_s\n";
    for (const auto& r : result.rows) {
        out << result.config.name << ',' << r.method << ',' << r.replication << ',' << csv::format(r.sens) << ','
            << csv::format(r.spec) << ',' << csv::format(r.mse_nonnull) << ',' << csv::format(r.mse_null) << ','
            << csv::format(r.runtime_s) << '\n';
    }
}

void write_summary_csv(std::ostream& out, const StudyResult& result)
{
    out << "case,method,replications,failures,sens,spec,mse_nonnull,mse_null,runtime_s\n";
    for (const auto& s : result.summary) {
        out << result.config.name << ',' << s.method << ',' << s.replications << ',' << s.failures << ','
            << csv::format(s.sens) << ',' << csv::format(s.spec) << ',' << csv::format(s.mse_nonnull) << ','
            << csv::format(s.mse_null) << ',' << csv::format(s.runtime_s) << '\n';
    }
}

} // namespace mivs
