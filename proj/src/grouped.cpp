#include <mivs/error.hpp>
#include <mivs/glm.hpp>
#include <mivs/grouped.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mivs {

GroupedProblem make_grouped_problem(const StandardizedView& view, const Eigen::VectorXd& outcome, Family family,
                                    const std::vector<int>& subjects)
{
    GroupedProblem prob;
    prob.family = family;
    prob.n = static_cast<int>(subjects.size());
    prob.y.resize(prob.n);
    for (int k = 0; k < prob.n; ++k) prob.y[k] = outcome[subjects[k]];
    prob.X.reserve(view.D());
    for (const auto& Xd : view.X) {
        Eigen::MatrixXd sub(prob.n, Xd.cols());
        for (int k = 0; k < prob.n; ++k) sub.row(k) = Xd.row(subjects[k]);
        prob.X.push_back(std::move(sub));
    }
    return prob;
}

GroupedProblem make_grouped_problem(const StandardizedView& view, const Eigen::VectorXd& outcome, Family family)
{
    std::vector<int> all(view.n());
    std::iota(all.begin(), all.end(), 0);
    return make_grouped_problem(view, outcome, family, all);
}

SolverControls grouped_controls()
{
    SolverControls c;
    c.max_outer = 200;
    return c;
}

double mm_curvature(Family family)
{
    return family == Family::Binomial ? 0.25 : 1.0;
}

void mm_working_response(MmState& state, const GroupedProblem& problem, const Eigen::VectorXd& mu,
                         const Eigen::MatrixXd& beta)
{
    const int D = problem.D();
    state.v = mm_curvature(problem.family);
    state.eta.resize(problem.n, D);
    state.y_tilde.resize(problem.n, D);
    for (int d = 0; d < D; ++d) {
        auto eta = state.eta.col(d);
        eta.setConstant(mu[d]);
        for (int j = 0; j < problem.p(); ++j) {
            if (beta(d, j) != 0.0) eta += beta(d, j) * problem.X[d].col(j);
        }
        for (int i = 0; i < problem.n; ++i) {
            state.y_tilde(i, d) = problem.family == Family::Binomial
                                      ? eta[i] + (problem.y[i] - glm::sigmoid(eta[i])) / state.v
                                      : problem.y[i];
        }
    }
    state.r = state.y_tilde - state.eta;
}

Eigen::VectorXd grouped_intercept_update(MmState& state, const Eigen::VectorXd& mu)
{
    Eigen::VectorXd shift = state.r.colwise().mean().transpose();
    state.r.rowwise() -= shift.transpose();
    return mu + shift;
}

Eigen::VectorXd group_soft_threshold(const Eigen::VectorXd& z, double threshold, double v, double n,
                                     double column_scale)
{
    const double norm = z.norm();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(z.size());
    if (norm > 0.0) {
        const double magnitude = soft_threshold(v / n * norm, threshold) / (v * column_scale);
        if (magnitude > 0.0) out = (magnitude / norm) * z;
    }
    return out;
}

Eigen::VectorXd group_update(MmState& state, const GroupedProblem& problem, int j, const Eigen::VectorXd& block,
                             double column_scale, double threshold)
{
    const int D = problem.D();
    const double n = problem.n;
    Eigen::VectorXd z(D);
    for (int d = 0; d < D; ++d) {
        z[d] = problem.X[d].col(j).dot(state.r.col(d)) + n * column_scale * block[d];
    }
    const Eigen::VectorXd updated = group_soft_threshold(z, threshold, state.v, n, column_scale);
    for (int d = 0; d < D; ++d) {
        const double change = updated[d] - block[d];
        if (change != 0.0) state.r.col(d) -= change * problem.X[d].col(j);
    }
    return updated;
}

namespace {

Eigen::VectorXd dataset_eta(const GroupedProblem& problem, int d, double mu, const Eigen::MatrixXd& beta)
{
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(problem.n, mu);
    for (int j = 0; j < problem.p(); ++j) {
        if (beta(d, j) != 0.0) eta += beta(d, j) * problem.X[d].col(j);
    }
    return eta;
}

double null_intercept(const GroupedProblem& problem)
{
    const double mean = problem.y.mean();
    if (problem.family == Family::Gaussian) return mean;
    if (!(mean > 0.0 && mean < 1.0)) throw NumericalError("binary outcome has a single class");
    return std::log(mean / (1.0 - mean));
}

} // namespace

double mm_loss(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& eta, int n)
{
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) total += glm::loss(family, y[i], eta[i]);
    return total / n;
}

double mm_majorizer(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                    const Eigen::VectorXd& eta_t, int n)
{
    const double v = mm_curvature(family);
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double step = eta[i] - eta_t[i];
        total += glm::loss(family, y[i], eta_t[i]) + step * glm::loss_derivative(family, y[i], eta_t[i]) +
                 0.5 * v * step * step;
    }
    return total / n;
}

double grouped_loss(const GroupedProblem& problem, const Eigen::VectorXd& mu, const Eigen::MatrixXd& beta)
{
    double total = 0.0;
    for (int d = 0; d < problem.D(); ++d) {
        total += mm_loss(problem.family, problem.y, dataset_eta(problem, d, mu[d], beta), problem.n);
    }
    return total;
}

double grouped_objective(const GroupedProblem& problem, const PenaltySpec& spec, double lambda,
                         const Eigen::VectorXd& mu, const Eigen::MatrixXd& beta)
{
    return grouped_loss(problem, mu, beta) + lambda * penalty_value(spec, beta);
}

double grouped_lambda_max(const GroupedProblem& problem, const PenaltySpec& spec)
{
    MmState state;
    const Eigen::VectorXd mu = Eigen::VectorXd::Constant(problem.D(), null_intercept(problem));
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(problem.D(), problem.p());
    mm_working_response(state, problem, mu, zero);
    grouped_intercept_update(state, mu);
    double lmax = 0.0;
    Eigen::VectorXd z(problem.D());
    for (int j = 0; j < problem.p(); ++j) {
        for (int d = 0; d < problem.D(); ++d) z[d] = problem.X[d].col(j).dot(state.r.col(d));
        lmax = std::max(lmax, state.v / problem.n * z.norm() / spec.weights[j]);
    }
    return lmax * (1.0 + 1e-12);
}

namespace {

class GroupedSolver
{
public:
    GroupedSolver(const GroupedProblem& problem, const PenaltySpec& spec, double lambda,
                  const SolverControls& controls)
        : prob_(problem), spec_(spec), lambda_(lambda), ctl_(controls)
    {
        threshold_ = lambda * spec.weights.array();
        scale_.resize(problem.p());
        for (int j = 0; j < problem.p(); ++j) {
            double c = 0.0;
            for (const auto& Xd : problem.X) c = std::max(c, Xd.col(j).squaredNorm() / problem.n);
            scale_[j] = c;
        }
    }

    GroupedFit run(Eigen::VectorXd mu, Eigen::MatrixXd beta)
    {
        GroupedFit fit;
        double obj = grouped_objective(prob_, spec_, lambda_, mu, beta);
        fit.objective_trace.push_back(obj);
        for (int outer = 1; outer <= ctl_.max_outer; ++outer) {
            outer_ = outer;
            fit.n_outer = outer;
            mm_working_response(state_, prob_, mu, beta);
            Eigen::VectorXd new_mu = mu;
            Eigen::MatrixXd new_beta = beta;
            const bool inner_ok = inner_loop(new_mu, new_beta, fit.n_inner);
            const double new_obj = grouped_objective(prob_, spec_, lambda_, new_mu, new_beta);

            double change = (new_mu - mu).cwiseAbs().maxCoeff();
            if (prob_.p() > 0) change = std::max(change, (new_beta - beta).colwise().norm().maxCoeff());
            mu = std::move(new_mu);
            beta = std::move(new_beta);
            obj = new_obj;
            fit.objective_trace.push_back(obj);
            if (prob_.family == Family::Gaussian) {
                fit.converged = inner_ok;
                break;
            }
            if (change < ctl_.tolerance && inner_ok) {
                fit.converged = true;
                break;
            }
        }
        fit.mu = std::move(mu);
        fit.beta = std::move(beta);
        for (int j = 0; j < prob_.p(); ++j) {
            if (fit.beta.col(j).squaredNorm() > 0.0) fit.active_groups.push_back(j);
        }
        return fit;
    }

private:
    // Block coordinate descent on the current majorizer; same working-set
    // scheme as the stacked solver.
    bool inner_loop(Eigen::VectorXd& mu, Eigen::MatrixXd& beta, int& sweeps)
    {
        std::vector<int> working;
        int local = 0;
        while (local < ctl_.max_sweeps) {
            double delta = update_intercepts(mu, beta);
            for (int j = 0; j < prob_.p(); ++j) delta = std::max(delta, update_block(j, mu, beta));
            ++local;
            if (delta < ctl_.tolerance) {
                sweeps += local;
                return true;
            }
            working.clear();
            for (int j = 0; j < prob_.p(); ++j) {
                if (beta.col(j).squaredNorm() > 0.0) working.push_back(j);
            }
            while (local < ctl_.max_sweeps) {
                delta = update_intercepts(mu, beta);
                std::size_t keep = 0;
                for (int j : working) {
                    delta = std::max(delta, update_block(j, mu, beta));
                    if (beta.col(j).squaredNorm() > 0.0) working[keep++] = j;
                }
                working.resize(keep);
                ++local;
                if (delta < ctl_.tolerance) break;
            }
        }
        sweeps += local;
        return false;
    }

    double update_intercepts(Eigen::VectorXd& mu, const Eigen::MatrixXd& beta)
    {
        Eigen::VectorXd updated = grouped_intercept_update(state_, mu);
        const double delta = (updated - mu).cwiseAbs().maxCoeff();
        mu = std::move(updated);
        notify(-1, mu, beta);
        return delta;
    }

    double update_block(int j, const Eigen::VectorXd& mu, Eigen::MatrixXd& beta)
    {
        Eigen::VectorXd updated = group_update(state_, prob_, j, beta.col(j), scale_[j], threshold_[j]);
        const double delta = (updated - beta.col(j)).norm();
        beta.col(j) = updated;
        notify(j, mu, beta);
        return delta;
    }

    void notify(int coordinate, const Eigen::VectorXd& mu, const Eigen::MatrixXd& beta)
    {
        if (!ctl_.observer) return;
        CoordinateEvent ev;
        ev.outer = outer_;
        ev.coordinate = coordinate;
        ev.surrogate = state_.v / (2.0 * prob_.n) * state_.r.squaredNorm() + lambda_ * penalty_value(spec_, beta);
        double drift = 0.0;
        for (int d = 0; d < prob_.D(); ++d) {
            const Eigen::VectorXd fresh = state_.y_tilde.col(d) - dataset_eta(prob_, d, mu[d], beta);
            drift = std::max(drift, (fresh - state_.r.col(d)).cwiseAbs().maxCoeff());
        }
        ev.residual_drift = drift;
        ctl_.observer(ev);
    }

    const GroupedProblem& prob_;
    const PenaltySpec& spec_;
    double lambda_;
    const SolverControls& ctl_;
    Eigen::ArrayXd threshold_;
    Eigen::VectorXd scale_;
    MmState state_;
    int outer_ = 0;
};

} // namespace

GroupedFit fit_grouped(const GroupedProblem& problem, const PenaltySpec& spec, double lambda,
                       const SolverControls& controls, const GroupedFit* warm_start)
{
    if (spec.family != PenaltyFamily::GroupLasso) {
        throw std::invalid_argument("the grouped solver takes the group-lasso penalty");
    }
    spec.validate(problem.p());
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
    GroupedSolver solver(problem, spec, lambda, controls);
    if (warm_start != nullptr && warm_start->beta.rows() == problem.D() && warm_start->beta.cols() == problem.p()) {
        return solver.run(warm_start->mu, warm_start->beta);
    }
    return solver.run(Eigen::VectorXd::Constant(problem.D(), null_intercept(problem)),
                      Eigen::MatrixXd::Zero(problem.D(), problem.p()));
}

double grouped_kkt_residual(const GroupedFit& fit, const GroupedProblem& problem, const PenaltySpec& spec,
                            double lambda)
{
    const int D = problem.D();
    const double n = problem.n;
    // Negative loss gradient per dataset: (1/n) X_d' (y - p_d), intercept first.
    Eigen::MatrixXd g(D, problem.p());
    double worst = 0.0;
    for (int d = 0; d < D; ++d) {
        const Eigen::VectorXd eta = dataset_eta(problem, d, fit.mu[d], fit.beta);
        Eigen::VectorXd resid(problem.n);
        for (int i = 0; i < problem.n; ++i) resid[i] = -glm::loss_derivative(problem.family, problem.y[i], eta[i]);
        worst = std::max(worst, std::abs(resid.sum() / n));
        g.row(d) = (problem.X[d].transpose() * resid / n).transpose();
    }
    for (int j = 0; j < problem.p(); ++j) {
        const double l = lambda * spec.weights[j];
        const double norm = fit.beta.col(j).norm();
        double v = 0.0;
        if (norm > 0.0) {
            v = (g.col(j) - l * fit.beta.col(j) / norm).norm();
        } else {
            v = std::max(0.0, g.col(j).norm() - l);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

Eigen::VectorXd pool_grouped_coefficients(const Eigen::MatrixXd& beta)
{
    return beta.colwise().mean().transpose();
}

} // namespace mivs
