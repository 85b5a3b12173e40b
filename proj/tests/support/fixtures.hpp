#pragma once
#include <mivs/data.hpp>
#include <mivs/grouped.hpp>
#include <mivs/stacked.hpp>

#include <Eigen/Dense>

#include <cstdint>

namespace fixtures {

struct SetShape
{
    int n = 40;
    int p = 5;
    int D = 3;
    mivs::Family family = mivs::Family::Binomial;
    double missing_rate = 0.2;
    double signal = 1.0;
    std::uint64_t seed = 1;
};

// Correlated normal covariates, outcome from a sparse linear predictor (first
// half of the covariates active, alternating signs). Masked cells get
// imputation-specific noise; the last covariate is never masked.
mivs::MultipleImputationSet random_set(const SetShape& shape);

// D identical copies of X with an all-false mask.
mivs::MultipleImputationSet replicate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int D);

// Stacked problem with the stacked standardization and the given weights.
mivs::StackedProblem stacked_problem(const mivs::MultipleImputationSet& set,
                                     mivs::WeightScheme scheme = mivs::WeightScheme::Equal);
mivs::GroupedProblem grouped_problem(const mivs::MultipleImputationSet& set);

} // namespace fixtures
