#include "fixtures.hpp"

#include <mivs/glm.hpp>
#include <mivs/rng.hpp>

namespace fixtures {

mivs::MultipleImputationSet random_set(const SetShape& s)
{
    mivs::Rng rng(s.seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    Eigen::MatrixXd X(s.n, s.p);
    for (int i = 0; i < s.n; ++i) {
        const double shared = normal(rng);
        for (int j = 0; j < s.p; ++j) X(i, j) = 0.4 * shared + normal(rng);
    }
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(s.p);
    for (int j = 0; j < (s.p + 1) / 2; ++j) beta[j] = (j % 2 == 0 ? 1.0 : -0.7) * s.signal;
    Eigen::VectorXd y(s.n);
    for (int i = 0; i < s.n; ++i) {
        const double eta = X.row(i).dot(beta);
        y[i] = s.family == mivs::Family::Binomial ? (unif(rng) < mivs::glm::sigmoid(eta) ? 1.0 : 0.0)
                                                  : eta + normal(rng);
    }
    mivs::MaskMatrix mask = mivs::MaskMatrix::Constant(s.n, s.p, false);
    for (int i = 0; i < s.n; ++i)
        for (int j = 0; j + 1 < s.p; ++j) mask(i, j) = unif(rng) < s.missing_rate;
    std::vector<Eigen::MatrixXd> imps;
    for (int d = 0; d < s.D; ++d) {
        Eigen::MatrixXd Xd = X;
        for (int i = 0; i < s.n; ++i)
            for (int j = 0; j < s.p; ++j)
                if (mask(i, j)) Xd(i, j) += 0.7 * normal(rng);
        imps.push_back(std::move(Xd));
    }
    return mivs::MultipleImputationSet::create(std::move(imps), y, mask);
}

mivs::MultipleImputationSet replicate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int D)
{
    return mivs::MultipleImputationSet::create(std::vector<Eigen::MatrixXd>(D, X), y,
                                               mivs::MaskMatrix::Constant(X.rows(), X.cols(), false));
}

mivs::StackedProblem stacked_problem(const mivs::MultipleImputationSet& set, mivs::WeightScheme scheme)
{
    const auto view = mivs::standardize(set, mivs::StandardizeMode::Stacked);
    return mivs::make_stacked_problem(view, set.outcome(), mivs::observation_weights(set, scheme),
                                      set.detect_family());
}

mivs::GroupedProblem grouped_problem(const mivs::MultipleImputationSet& set)
{
    const auto view = mivs::standardize(set, mivs::StandardizeMode::PerDataset);
    return mivs::make_grouped_problem(view, set.outcome(), set.detect_family());
}

} // namespace fixtures
