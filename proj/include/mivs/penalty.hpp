#pragma once
#include <Eigen/Dense>

namespace mivs {

enum class PenaltyFamily { Lasso, ElasticNet, GroupLasso };

// Adaptive weights are clamped here so that lambda_max stays finite.
inline constexpr double kMaxAdaptiveWeight = 1e15;

/**
 * Penalty configuration shared by the stacked and grouped solvers.
 *
 * Stacked families evaluate alpha * sum a_j |b_j| + (1 - alpha) * sum b_j^2
 * (no 1/2 on the ridge term). The group family evaluates
 * sum_j a_j ||b_{.,j}||_2. The intercept is never penalized.
 */
struct PenaltySpec
{
    PenaltyFamily family = PenaltyFamily::Lasso;
    double alpha = 1.0;
    bool adaptive = false;
    Eigen::VectorXd weights; // a_j, all ones unless adaptive
    double gamma = 1.0;

    static PenaltySpec lasso(int p);
    static PenaltySpec elastic_net(double alpha, int p);
    static PenaltySpec group_lasso(int p);

    // Returns a copy carrying adaptive weights.
    PenaltySpec with_adaptive_weights(Eigen::VectorXd a, double gamma) const;

    // Lasso ignores alpha and always mixes with 1.
    double mixing() const { return family == PenaltyFamily::Lasso ? 1.0 : alpha; }

    // Throws std::invalid_argument when alpha, weights or p are inconsistent.
    void validate(int p) const;
};

// gamma = ceil(2v / (1 - v)) + 1; requires 0 <= v < 1.
double gamma_from_ratio(double v);
// v = log(p) / log(nD).
double stacked_gamma(int p, int n, int D);
// v = log(pD) / log(nD).
double grouped_gamma(int p, int n, int D);

// a_j = (|b_j| + 1/(nD))^-gamma, capped at kMaxAdaptiveWeight.
Eigen::VectorXd adaptive_weights_stacked(const Eigen::VectorXd& initial_beta, int n, int D, double gamma);
// a_j = (||b_{.,j}||_2 + 1/(nD))^-gamma with initial_betas laid out D x p.
Eigen::VectorXd adaptive_weights_grouped(const Eigen::MatrixXd& initial_betas, int n, int D, double gamma);

double penalty_value(const PenaltySpec& spec, const Eigen::VectorXd& beta);
// beta is D x p, one column per covariate group.
double penalty_value(const PenaltySpec& spec, const Eigen::MatrixXd& beta);

} // namespace mivs
