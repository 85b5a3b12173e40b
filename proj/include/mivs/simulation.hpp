#pragma once
#include <mivs/data.hpp>
#include <mivs/imputation.hpp>
#include <mivs/rng.hpp>
#include <mivs/tuning.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mivs {

// Indices are 0-based throughout; config files use 1-based covariate numbers.
struct CorrelationBlock
{
    std::vector<int> indices;
    double rho = 0.0;
};

// Covariates that go missing together for a subject, with the target share
// of subjects missing them.
struct MissingnessGroup
{
    std::vector<int> indices;
    double rate = 0.0;
};

struct SimulationCaseConfig
{
    std::string name = "custom";
    int n = 500;
    int p = 20;
    std::vector<CorrelationBlock> blocks;
    Eigen::VectorXd beta_true;
    double beta0 = 0.0;
    std::vector<MissingnessGroup> missingness;
    double mar_covariate_coef = 0.5;
    double mar_outcome_coef = 0.5;
    int D = 5;
    int R = 50;
    std::uint64_t seed = 1;

    // The fully observed covariate driving missingness: always the last one.
    int driver() const { return p - 1; }
    int signals() const;

    // Throws InputError on overlapping blocks, rho outside (-1, 1), a non
    // positive-definite block, out-of-range indices, a group touching the
    // driver covariate, or a rate outside [0, 1).
    void validate() const;
};

// Presets 1-4; throws InputError for any other id.
SimulationCaseConfig case_preset(int id);

// JSON config. Keys: name, base_case, n, p, blocks [{indices, rho}],
// beta {"<j>": value}, beta0, missingness [{indices, rate}],
// mar_covariate_coef, mar_outcome_coef, imputations, replications, seed.
// Unset keys come from base_case when given.
SimulationCaseConfig load_case_config(const std::string& path);
SimulationCaseConfig parse_case_config(std::istream& in, const std::string& source_name);

Eigen::MatrixXd generate_covariates(const SimulationCaseConfig& config, int n, Rng& rng);
Eigen::VectorXd generate_outcome(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta, double beta0, Rng& rng);

struct MarModel
{
    std::vector<MissingnessGroup> groups;
    std::vector<double> intercepts; // one per group; -inf for rate 0
    double covariate_coef = 0.5;
    double outcome_coef = 0.5;
    int driver = 0;
};

// Intercept a0 with mean over draws of expit(a0 + a1 x + a2 y) equal to
// `target`, by bisection. Target 0 gives -inf.
double solve_mar_intercept(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double target, double covariate_coef,
                           double outcome_coef);

// Calibrates every group's intercept on `draws` synthetic subjects drawn
// from the case's own generating model.
MarModel calibrate_mar(const SimulationCaseConfig& config, std::uint64_t seed, int draws = 100000);

MaskMatrix impose_mar(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const MarModel& model, Rng& rng);

struct ReplicationMetrics
{
    std::string method;
    int replication = 0;
    double sens = 0.0;
    double spec = 0.0;
    double mse_nonnull = 0.0;
    double mse_null = 0.0;
    double runtime_s = 0.0;
};

// sens: share of true signals estimated nonzero. spec: share of true nulls
// estimated exactly zero. MSEs are sums over the respective coefficients.
ReplicationMetrics score_replication(const Eigen::VectorXd& estimate, const Eigen::VectorXd& beta_true);

struct StudyOptions
{
    std::vector<Method> methods;
    TuningOptions tuning; // tuning.seed is replaced per replication
    PmmOptions pmm;
    int threads = 1;      // replications run concurrently
    bool record_runtime = true;
    int calibration_draws = 100000;
};

struct ReplicationFailure
{
    int replication = 0;
    std::string method; // empty when data generation or imputation failed
    std::string message;
};

struct MethodSummary
{
    std::string method;
    double sens = 0.0;
    double spec = 0.0;
    double mse_nonnull = 0.0;
    double mse_null = 0.0;
    double runtime_s = 0.0;
    int replications = 0;
    int failures = 0;
};

struct StudyResult
{
    SimulationCaseConfig config;
    MarModel mar;
    std::vector<ReplicationMetrics> rows; // replication-major, methods in the given order
    std::vector<ReplicationFailure> failures;
    std::vector<MethodSummary> summary;
};

// One simulated, masked and imputed replication.
struct SimulatedData
{
    Eigen::MatrixXd X; // complete covariates
    Eigen::VectorXd y;
    MaskMatrix mask;
    MultipleImputationSet imputed;
};

SimulatedData simulate_replication(const SimulationCaseConfig& config, const MarModel& mar, int replication,
                                   const PmmOptions& pmm);

StudyResult run_study(const SimulationCaseConfig& config, const StudyOptions& options);

void write_replications_csv(std::ostream& out, const StudyResult& result);
void write_summary_csv(std::ostream& out, const StudyResult& result);

} // namespace mivs
