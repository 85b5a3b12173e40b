#pragma once
#include <mivs/data.hpp>
#include <mivs/rng.hpp>

#include <Eigen/Dense>

namespace mivs {

struct PmmOptions
{
    int donors = 5;
    int cycles = 10;
    int min_observed = 10;
    double ridge = 1e-5;
};

/**
 * Multiple imputation by chained equations with predictive mean matching.
 *
 * Each of the D chains starts by filling missing cells with random draws from
 * the column's observed values, then for `cycles` rounds visits the columns
 * with missing values in increasing order of missingness. A column is
 * regressed on all other columns plus the outcome over its observed rows, a
 * coefficient vector is drawn from the normal-approximation posterior, and
 * each missing cell copies the observed value of one of the `donors` rows
 * closest in predicted mean, chosen uniformly.
 *
 * Values of X at masked cells are ignored. Throws InputError when a column
 * has fewer than `min_observed` observed values.
 */
MultipleImputationSet impute_pmm(const Eigen::MatrixXd& X, const MaskMatrix& mask, const Eigen::VectorXd& outcome,
                                 int D, const PmmOptions& options, Rng& rng);

} // namespace mivs
