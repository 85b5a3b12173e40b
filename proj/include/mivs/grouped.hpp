#pragma once
#include <mivs/data.hpp>
#include <mivs/penalty.hpp>
#include <mivs/stacked.hpp>

#include <Eigen/Dense>

#include <vector>

namespace mivs {

/**
 * D imputed designs fitted with separate intercepts and coefficients, tied by
 * a group penalty on each covariate's D coefficients. The loss is
 * (1/n) sum_d sum_i loss(y_i, mu_d + x_{d,i}' beta_d).
 */
struct GroupedProblem
{
    Family family = Family::Binomial;
    int n = 0;
    std::vector<Eigen::MatrixXd> X; // D matrices, n x p
    Eigen::VectorXd y;

    int D() const { return static_cast<int>(X.size()); }
    int p() const { return X.empty() ? 0 : static_cast<int>(X.front().cols()); }
};

GroupedProblem make_grouped_problem(const StandardizedView& view, const Eigen::VectorXd& outcome, Family family);
GroupedProblem make_grouped_problem(const StandardizedView& view, const Eigen::VectorXd& outcome, Family family,
                                    const std::vector<int>& subjects);

// Defaults for the MM loop: 200 outer iterations instead of 100.
SolverControls grouped_controls();

// Curvature bound of the per-row loss: 1/4 for the logistic loss, 1 for the
// gaussian loss (where the quadratic is exact).
double mm_curvature(Family family);

struct MmState
{
    double v = 0.25;
    Eigen::MatrixXd eta;     // n x D
    Eigen::MatrixXd y_tilde; // n x D
    Eigen::MatrixXd r;       // y_tilde - mu_d - x' beta_d
};

// y_tilde = eta + (y - p)/v for binomial, y for gaussian.
void mm_working_response(MmState& state, const GroupedProblem& problem, const Eigen::VectorXd& mu,
                         const Eigen::MatrixXd& beta);

// mu_d <- (1/n) sum_i (y_tilde - x' beta_d); residuals shift per dataset.
Eigen::VectorXd grouped_intercept_update(MmState& state, const Eigen::VectorXd& mu);

// (1/(v c)) S((v/n) ||z||, threshold) z / ||z||; the zero vector when z = 0.
Eigen::VectorXd group_soft_threshold(const Eigen::VectorXd& z, double threshold, double v, double n,
                                     double column_scale = 1.0);

/**
 * Block step for covariate j:
 *   beta_{.,j} <- (1/(v c)) S((v/n) ||z_j||, threshold) z_j / ||z_j||
 * with z_{d,j} = sum_i x_{d,ij} r_{d,i} + n c beta_{d,j}. c is the largest
 * (1/n) sum_i x_{d,ij}^2 over d, which is 1 on per-dataset standardized data.
 */
Eigen::VectorXd group_update(MmState& state, const GroupedProblem& problem, int j, const Eigen::VectorXd& block,
                             double column_scale, double threshold);

struct GroupedFit
{
    Eigen::VectorXd mu;   // D intercepts
    Eigen::MatrixXd beta; // D x p
    std::vector<int> active_groups;
    std::vector<double> objective_trace;
    int n_outer = 0;
    int n_inner = 0;
    bool converged = false;
};

double grouped_loss(const GroupedProblem& problem, const Eigen::VectorXd& mu, const Eigen::MatrixXd& beta);
double grouped_objective(const GroupedProblem& problem, const PenaltySpec& spec, double lambda,
                         const Eigen::VectorXd& mu, const Eigen::MatrixXd& beta);

// (1/n) [L(eta_t) + (eta - eta_t)' grad L(eta_t) + v/2 ||eta - eta_t||^2] for
// one dataset; dominates (1/n) L(eta) and touches it at eta_t.
double mm_majorizer(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                    const Eigen::VectorXd& eta_t, int n);
double mm_loss(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& eta, int n);

double grouped_lambda_max(const GroupedProblem& problem, const PenaltySpec& spec);

GroupedFit fit_grouped(const GroupedProblem& problem, const PenaltySpec& spec, double lambda,
                       const SolverControls& controls = grouped_controls(),
                       const GroupedFit* warm_start = nullptr);

double grouped_kkt_residual(const GroupedFit& fit, const GroupedProblem& problem, const PenaltySpec& spec,
                            double lambda);

// Mean over imputations of each covariate's coefficient.
Eigen::VectorXd pool_grouped_coefficients(const Eigen::MatrixXd& beta);

} // namespace mivs
