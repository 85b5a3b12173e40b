#pragma once
#include <mivs/data.hpp>
#include <mivs/penalty.hpp>

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace mivs {

// Emitted after every intercept or coefficient update when an observer is
// installed. Only used by diagnostics and tests; costs O(nD) per event.
struct CoordinateEvent
{
    int outer = 0;
    int coordinate = -1;    // -1 for the intercept
    double surrogate = 0.0; // quadratic surrogate plus penalty
    double residual_drift = 0.0;
};

struct SolverControls
{
    double tolerance = 1e-7;
    int max_outer = 100;
    int max_sweeps = 10000;
    double weight_floor = 1e-5;
    std::function<void(const CoordinateEvent&)> observer;
};

/**
 * All D imputations stacked into one nD x p design.
 *
 * Row d*n + i holds subject i of imputation d; o repeats the subject weight
 * across imputations. The loss is normalised by the subject count n.
 */
struct StackedProblem
{
    Family family = Family::Binomial;
    int n = 0;
    int D = 0;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd o;

    int p() const { return static_cast<int>(X.cols()); }
    Eigen::Index rows() const { return X.rows(); }
};

StackedProblem make_stacked_problem(const StandardizedView& view,
                                    const Eigen::VectorXd& outcome,
                                    const ObservationWeights& weights,
                                    Family family);

// Restricts the problem to the listed subjects (all of their D rows).
StackedProblem make_stacked_problem(const StandardizedView& view,
                                    const Eigen::VectorXd& outcome,
                                    const ObservationWeights& weights,
                                    Family family,
                                    const std::vector<int>& subjects);

// Linearisation of the loss around the current linear predictor.
struct IrlsState
{
    Eigen::VectorXd eta;
    Eigen::VectorXd p_tilde;
    Eigen::VectorXd w;
    Eigen::VectorXd y_tilde;
    Eigen::VectorXd r;  // y_tilde - mu - x' beta
    Eigen::VectorXd ow; // o * w
    double sum_ow = 0.0;
};

struct WorkingValues
{
    double p_tilde;
    double w;
    double y_tilde;
};

// Binomial: w = p(1-p) floored at weight_floor, y_tilde = eta + (y - p)/w.
// Gaussian: w = 1, y_tilde = y.
WorkingValues working_response(double y, double eta, Family family, double weight_floor);

void update_working_response(IrlsState& state, const StackedProblem& problem, double mu,
                             const Eigen::VectorXd& beta, double weight_floor);

// mu <- sum o w (y_tilde - x'beta) / sum o w; residuals shift by the change.
double intercept_update(IrlsState& state, double mu);

// sum_d sum_i o_i w_{d,i} x_{d,ij}^2
double weighted_column_norm(const IrlsState& state, const StackedProblem& problem, int j);

double soft_threshold(double z, double lambda);

/**
 * One coordinate step:
 *   beta_j <- S(z_j / n, threshold) / (xw2 / n + ridge)
 * with z_j = sum o w x_j r + xw2 * beta_j, threshold = lambda alpha a_j and
 * ridge = 2 lambda (1 - alpha). Residuals absorb the change.
 */
double coefficient_update(IrlsState& state, const StackedProblem& problem, int j, double beta_j,
                          double xw2, double threshold, double ridge);

struct StackedFit
{
    double mu = 0.0;
    Eigen::VectorXd beta;
    std::vector<int> active_set;
    std::vector<double> objective_trace;
    int n_outer = 0;
    int n_inner = 0;
    bool converged = false;
};

// (1/n) sum o * loss + lambda * P(beta).
double stacked_objective(const StackedProblem& problem, const PenaltySpec& spec, double lambda, double mu,
                         const Eigen::VectorXd& beta);

struct LossGradient
{
    double intercept;
    Eigen::VectorXd beta;
};

// Gradient of the smooth part (1/n) sum o * loss.
LossGradient stacked_loss_gradient(const StackedProblem& problem, double mu, const Eigen::VectorXd& beta);

// Intercept of the weighted intercept-only model. Throws NumericalError when
// a binomial outcome has a single class.
double null_intercept(const StackedProblem& problem);

// Smallest lambda at which every coefficient is zero.
double stacked_lambda_max(const StackedProblem& problem, const PenaltySpec& spec,
                          double weight_floor = SolverControls{}.weight_floor);

StackedFit fit_stacked(const StackedProblem& problem, const PenaltySpec& spec, double lambda,
                       const SolverControls& controls = {}, const StackedFit* warm_start = nullptr);

// Largest violation of the first-order conditions at the fit, including the
// intercept equation.
double kkt_residual(const StackedFit& fit, const StackedProblem& problem, const PenaltySpec& spec,
                    double lambda);

} // namespace mivs
