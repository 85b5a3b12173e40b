#pragma once
#include <mivs/data.hpp>
#include <mivs/grouped.hpp>
#include <mivs/penalty.hpp>
#include <mivs/stacked.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mivs {

enum class MethodKind { SLasso, SaLasso, SEnet, SaEnet, GLasso, GaLasso };

struct Method
{
    MethodKind kind = MethodKind::SLasso;
    WeightScheme scheme = WeightScheme::Equal;

    bool grouped() const { return kind == MethodKind::GLasso || kind == MethodKind::GaLasso; }
    bool adaptive() const
    {
        return kind == MethodKind::SaLasso || kind == MethodKind::SaEnet || kind == MethodKind::GaLasso;
    }
    bool tunes_alpha() const { return kind == MethodKind::SEnet || kind == MethodKind::SaEnet; }

    // Non-adaptive method whose fit seeds the adaptive weights: SENET (same
    // weight scheme) for the stacked family, GLASSO for the grouped one.
    Method initializer() const;

    // CLI spelling, e.g. "saenet:w".
    std::string name() const;

    bool operator==(const Method&) const = default;
};

// Accepts slasso, salasso, senet, saenet (optionally suffixed ":w" for
// fraction-observed weights), glasso and galasso. Throws InputError.
Method parse_method(std::string_view text);

inline constexpr double kNonAdaptiveLambdaRatio = 1e-3;
inline constexpr double kAdaptiveLambdaRatio = 1e-6;
inline constexpr int kDefaultGridSize = 100;
inline constexpr int kDefaultFolds = 5;
// Smallest alpha on the elastic-net grid; alpha = 0 has no finite lambda_max.
inline constexpr double kAlphaFloor = 0.001;

// 0.001, 0.1, 0.2, ..., 0.9, 1.
std::vector<double> default_alpha_grid();

struct TuningGrid
{
    double alpha = 1.0;
    std::vector<double> lambdas; // descending, lambdas.front() == lambda_max
    double lambda_max = 0.0;
    double lambda_min_ratio = kNonAdaptiveLambdaRatio;
};

// `size` log-equally spaced values from lambda_max down to ratio * lambda_max.
TuningGrid build_grid(double lambda_max, double ratio, int size, double alpha = 1.0);

// Random partition of subjects into K near-equal folds; every row of a
// subject (one per imputation) shares its fold.
struct FoldMap
{
    int K = 0;
    std::vector<int> fold_of_subject;

    std::vector<int> validation(int k) const;
    std::vector<int> training(int k) const;
};

FoldMap assign_folds(int n, int K, std::uint64_t seed);

struct Candidate
{
    double alpha = 1.0;
    double lambda = 0.0;
    int grid = 0;  // index into the list of grids
    int index = 0; // position along that grid's lambda path
    double mean_error = 0.0;
    double se = 0.0;
    std::vector<double> fold_errors;
};

struct CvResult
{
    std::vector<Candidate> candidates;
    FoldMap folds;
    int selected = -1;
    std::string rule;

    const Candidate& best() const { return candidates.at(selected); }
};

struct TuningOptions
{
    int folds = kDefaultFolds;
    int grid_size = kDefaultGridSize;
    // Overrides the 1e-3 / 1e-6 defaults when set.
    std::optional<double> lambda_min_ratio;
    std::vector<double> alphas = default_alpha_grid();
    std::uint64_t seed = 1;
    int threads = 1;
    SolverControls stacked_controls;
    SolverControls grouped_controls = mivs::grouped_controls();

    double ratio_for(const Method& m) const
    {
        return lambda_min_ratio.value_or(m.adaptive() ? kAdaptiveLambdaRatio : kNonAdaptiveLambdaRatio);
    }
};

// Everything a fit needs besides the penalty: the design standardized the
// way the method requires, the outcome, and observation weights.
struct FitContext
{
    Family family = Family::Binomial;
    StandardizedView view;
    Eigen::VectorXd outcome;
    ObservationWeights weights;
    int D() const { return view.D(); }
    int n() const { return view.n(); }
    int p() const { return view.p(); }
};

FitContext make_context(const MultipleImputationSet& set, const Method& method, Family family);

// Grids for a method given its base penalty (adaptive weights included):
// one grid per alpha for elastic-net families, a single grid otherwise.
std::vector<TuningGrid> build_grids(const FitContext& ctx, const Method& method, const PenaltySpec& base,
                                    const TuningOptions& options);

/**
 * K-fold cross-validation over every (alpha, lambda) candidate. Fits on K-1
 * folds warm-started along each lambda path and scores the held-out fold:
 * binomial deviance (squared error for gaussian) averaged over the fold's
 * rows with the training observation weights for stacked methods, and
 * averaged over imputations for grouped methods. Throws InputError when a
 * binomial fold holds a single outcome class.
 */
CvResult cross_validate(const FitContext& ctx, const Method& method, const PenaltySpec& base,
                        const std::vector<TuningGrid>& grids, const FoldMap& folds, const TuningOptions& options);

// One-standard-error rule. Single-alpha results: largest lambda whose mean
// error is within one SE of the minimum. Multi-alpha results: among those
// candidates, the largest lambda * alpha (ties: larger lambda, then alpha).
int select_one_se(const CvResult& result);

struct StageRecord
{
    Method method;
    PenaltySpec penalty;
    std::vector<TuningGrid> grids;
    std::optional<CvResult> cv; // absent when lambda was supplied
    double alpha = 1.0;
    double lambda = 0.0;
};

struct MethodFit
{
    Method method;
    FitContext context;
    std::vector<StageRecord> stages;
    std::optional<StackedFit> stacked;
    std::optional<GroupedFit> grouped;

    // Length-p estimate on the standardized scale; grouped fits are pooled.
    Eigen::VectorXd standardized_estimate() const;
    // Raw-scale intercept and coefficients; grouped fits average the D
    // back-transformed coefficient vectors.
    Coefficients original_estimate() const;
    // Raw-scale coefficients per imputation, D x p (grouped fits only).
    Eigen::MatrixXd per_imputation_original() const;
    std::vector<bool> selected() const;
    bool converged() const;
};

struct FixedTuning
{
    double lambda = 0.0;
    std::optional<double> alpha;
};

/**
 * Two-stage pipeline. Non-adaptive methods: tune (or use `fixed`) and fit.
 * Adaptive methods: tune and fit the initializer, turn its standardized
 * coefficients into weights with the fixed gamma rule, then tune (or use
 * `fixed`) and fit the adaptive method on a 1e-6 grid. Both stages are kept.
 */
MethodFit fit_method(const MultipleImputationSet& set, const Method& method, const TuningOptions& options,
                     const std::optional<FixedTuning>& fixed = std::nullopt);

// Fits along grid.lambdas up to and including position `stop`, warm started.
StackedFit fit_stacked_path(const StackedProblem& problem, const PenaltySpec& spec, const TuningGrid& grid,
                            int stop, const SolverControls& controls);
GroupedFit fit_grouped_path(const GroupedProblem& problem, const PenaltySpec& spec, const TuningGrid& grid,
                            int stop, const SolverControls& controls);

} // namespace mivs
