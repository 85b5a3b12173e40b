#include <mivs/error.hpp>
#include <mivs/imputation.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace mivs {
namespace {

struct ColumnPlan
{
    int column;
    std::vector<int> observed;
    std::vector<int> missing;
};

// Posterior draw for a linear regression with a flat prior, as in the
// classic normal-approximation imputation step. Returns (point, draw).
std::pair<Eigen::VectorXd, Eigen::VectorXd> draw_regression(const Eigen::MatrixXd& P, const Eigen::VectorXd& t,
                                                            double ridge, Rng& rng)
{
    const auto k = P.cols();
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
    xtx.selfadjointView<Eigen::Lower>().rankUpdate(P.transpose());
    xtx.triangularView<Eigen::Upper>() = xtx.transpose();
    xtx.diagonal() += ridge * xtx.diagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
    const Eigen::MatrixXd v = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::VectorXd coef = v * (P.transpose() * t);
    const double rss = (t - P * coef).squaredNorm();
    const double df = std::max<double>(static_cast<double>(P.rows() - k), 1.0);
    std::chi_squared_distribution<double> chi(df);
    const double sigma = std::sqrt(rss / chi(rng));
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(k);
    for (Eigen::Index i = 0; i < k; ++i) z[i] = normal(rng);
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (v + v.transpose()));
    const Eigen::VectorXd lz = llt.matrixL() * z;
    Eigen::VectorXd draw = coef + sigma * lz;
    return {coef, draw};
}

void impute_column(Eigen::MatrixXd& data, const ColumnPlan& plan, const Eigen::VectorXd& outcome,
                   const PmmOptions& options, Rng& rng)
{
    const auto p = data.cols();
    const int j = plan.column;
    // Design: intercept, every other covariate, the outcome.
    auto design_row = [&](int i, auto&& row) {
        row[0] = 1.0;
        Eigen::Index c = 1;
        for (Eigen::Index l = 0; l < p; ++l) {
            if (l != j) row[c++] = data(i, l);
        }
        row[c] = outcome[i];
    };
    const auto k = p + 1;
    Eigen::MatrixXd P_obs(plan.observed.size(), k);
    Eigen::VectorXd t(plan.observed.size());
    for (std::size_t r = 0; r < plan.observed.size(); ++r) {
        design_row(plan.observed[r], P_obs.row(r));
        t[r] = data(plan.observed[r], j);
    }
    Eigen::MatrixXd P_mis(plan.missing.size(), k);
    for (std::size_t r = 0; r < plan.missing.size(); ++r) design_row(plan.missing[r], P_mis.row(r));

    const auto [coef, draw] = draw_regression(P_obs, t, options.ridge, rng);
    const Eigen::VectorXd yhat_obs = P_obs * coef;
    const Eigen::VectorXd yhat_mis = P_mis * draw;

    const int n_obs = static_cast<int>(plan.observed.size());
    const int donors = std::min(options.donors, n_obs);
    std::vector<int> idx(n_obs);
    std::uniform_int_distribution<int> pick(0, donors - 1);
    for (std::size_t r = 0; r < plan.missing.size(); ++r) {
        std::iota(idx.begin(), idx.end(), 0);
        const double target = yhat_mis[r];
        auto closer = [&](int a, int b) {
            const double da = std::abs(yhat_obs[a] - target), db = std::abs(yhat_obs[b] - target);
            return da < db || (da == db && a < b);
        };
        std::nth_element(idx.begin(), idx.begin() + (donors - 1), idx.end(), closer);
        std::sort(idx.begin(), idx.begin() + donors, closer);
        data(plan.missing[r], j) = t[idx[pick(rng)]];
    }
}

} // namespace

MultipleImputationSet impute_pmm(const Eigen::MatrixXd& X, const MaskMatrix& mask, const Eigen::VectorXd& outcome,
                                 int D, const PmmOptions& options, Rng& rng)
{
    const auto n = X.rows();
    const auto p = X.cols();
    if (mask.rows() != n || mask.cols() != p) throw InputError("mask shape does not match the design");
    if (outcome.size() != n) throw InputError("outcome length does not match the design");
    if (D < 1) throw InputError("at least one imputation is required");

    std::vector<ColumnPlan> plans;
    for (Eigen::Index j = 0; j < p; ++j) {
        ColumnPlan plan{static_cast<int>(j), {}, {}};
        for (Eigen::Index i = 0; i < n; ++i) (mask(i, j) ? plan.missing : plan.observed).push_back(static_cast<int>(i));
        if (plan.missing.empty()) continue;
        if (static_cast<int>(plan.observed.size()) < options.min_observed) {
            throw InputError("covariate " + std::to_string(j + 1) + " has only " +
                             std::to_string(plan.observed.size()) + " observed values");
        }
        plans.push_back(std::move(plan));
    }
    std::stable_sort(plans.begin(), plans.end(),
                     [](const ColumnPlan& a, const ColumnPlan& b) { return a.missing.size() < b.missing.size(); });

    std::vector<Eigen::MatrixXd> imputations;
    imputations.reserve(D);
    for (int d = 0; d < D; ++d) {
        Eigen::MatrixXd data = X;
        for (const auto& plan : plans) {
            std::uniform_int_distribution<std::size_t> pick(0, plan.observed.size() - 1);
            for (int i : plan.missing) data(i, plan.column) = X(plan.observed[pick(rng)], plan.column);
        }
        if (!plans.empty()) {
            for (int cycle = 0; cycle < options.cycles; ++cycle) {
                for (const auto& plan : plans) impute_column(data, plan, outcome, options, rng);
            }
        }
        imputations.push_back(std::move(data));
    }
    return MultipleImputationSet::create(std::move(imputations), outcome, mask);
}

} // namespace mivs
