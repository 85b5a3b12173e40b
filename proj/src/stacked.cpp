#include <mivs/error.hpp>
#include <mivs/glm.hpp>
#include <mivs/stacked.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mivs {

StackedProblem make_stacked_problem(const StandardizedView& view,
                                    const Eigen::VectorXd& outcome,
                                    const ObservationWeights& weights,
                                    Family family,
                                    const std::vector<int>& subjects)
{
    const int D = view.D();
    const int m = static_cast<int>(subjects.size());
    StackedProblem prob;
    prob.family = family;
    prob.n = m;
    prob.D = D;
    prob.X.resize(static_cast<Eigen::Index>(m) * D, view.p());
    prob.y.resize(prob.X.rows());
    prob.o.resize(prob.X.rows());
    for (int d = 0; d < D; ++d) {
        for (int k = 0; k < m; ++k) {
            const Eigen::Index row = static_cast<Eigen::Index>(d) * m + k;
            prob.X.row(row) = view.X[d].row(subjects[k]);
            prob.y[row] = outcome[subjects[k]];
            prob.o[row] = weights.o[subjects[k]];
        }
    }
    return prob;
}

StackedProblem make_stacked_problem(const StandardizedView& view,
                                    const Eigen::VectorXd& outcome,
                                    const ObservationWeights& weights,
                                    Family family)
{
    std::vector<int> all(view.n());
    std::iota(all.begin(), all.end(), 0);
    return make_stacked_problem(view, outcome, weights, family, all);
}

WorkingValues working_response(double y, double eta, Family family, double weight_floor)
{
    if (family == Family::Gaussian) return {eta, 1.0, y};
    const double p = glm::sigmoid(eta);
    const double w = std::max(p * (1.0 - p), weight_floor);
    return {p, w, eta + (y - p) / w};
}

namespace {

Eigen::VectorXd linear_predictor(const StackedProblem& problem, double mu, const Eigen::VectorXd& beta)
{
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(problem.rows(), mu);
    for (int j = 0; j < problem.p(); ++j) {
        if (beta[j] != 0.0) eta += beta[j] * problem.X.col(j);
    }
    return eta;
}

} // namespace

void update_working_response(IrlsState& state, const StackedProblem& problem, double mu,
                             const Eigen::VectorXd& beta, double weight_floor)
{
    const auto rows = problem.rows();
    state.eta = linear_predictor(problem, mu, beta);
    state.p_tilde.resize(rows);
    state.w.resize(rows);
    state.y_tilde.resize(rows);
    for (Eigen::Index k = 0; k < rows; ++k) {
        auto wv = working_response(problem.y[k], state.eta[k], problem.family, weight_floor);
        state.p_tilde[k] = wv.p_tilde;
        state.w[k] = wv.w;
        state.y_tilde[k] = wv.y_tilde;
    }
    state.r = state.y_tilde - state.eta;
    state.ow = problem.o.cwiseProduct(state.w);
    state.sum_ow = state.ow.sum();
}

double intercept_update(IrlsState& state, double mu)
{
    if (!(state.sum_ow > 0.0)) throw NumericalError("total observation weight is zero");
    const double shift = state.ow.dot(state.r) / state.sum_ow;
    state.r.array() -= shift;
    return mu + shift;
}

double weighted_column_norm(const IrlsState& state, const StackedProblem& problem, int j)
{
    return (state.ow.array() * problem.X.col(j).array().square()).sum();
}

double soft_threshold(double z, double lambda)
{
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

double coefficient_update(IrlsState& state, const StackedProblem& problem, int j, double beta_j,
                          double xw2, double threshold, double ridge)
{
    const auto x = problem.X.col(j);
    const double z = (state.ow.array() * x.array() * state.r.array()).sum() + xw2 * beta_j;
    const double n = problem.n;
    const double denom = xw2 / n + ridge;
    const double updated = denom > 0.0 ? soft_threshold(z / n, threshold) / denom : 0.0;
    if (updated != beta_j) state.r -= (updated - beta_j) * x;
    return updated;
}

double stacked_objective(const StackedProblem& problem, const PenaltySpec& spec, double lambda, double mu,
                         const Eigen::VectorXd& beta)
{
    const Eigen::VectorXd eta = linear_predictor(problem, mu, beta);
    double loss = 0.0;
    for (Eigen::Index k = 0; k < problem.rows(); ++k) {
        loss += problem.o[k] * glm::loss(problem.family, problem.y[k], eta[k]);
    }
    return loss / problem.n + lambda * penalty_value(spec, beta);
}

LossGradient stacked_loss_gradient(const StackedProblem& problem, double mu, const Eigen::VectorXd& beta)
{
    const Eigen::VectorXd eta = linear_predictor(problem, mu, beta);
    Eigen::VectorXd g(problem.rows());
    for (Eigen::Index k = 0; k < problem.rows(); ++k) {
        g[k] = problem.o[k] * glm::loss_derivative(problem.family, problem.y[k], eta[k]);
    }
    const double n = problem.n;
    return {g.sum() / n, problem.X.transpose() * g / n};
}

double null_intercept(const StackedProblem& problem)
{
    const double mean = problem.o.dot(problem.y) / problem.o.sum();
    if (problem.family == Family::Gaussian) return mean;
    if (!(mean > 0.0 && mean < 1.0)) throw NumericalError("binary outcome has a single class");
    return std::log(mean / (1.0 - mean));
}

double stacked_lambda_max(const StackedProblem& problem, const PenaltySpec& spec, double weight_floor)
{
    const double alpha = spec.mixing();
    if (!(alpha > 0.0)) throw NumericalError("lambda_max is infinite for a pure ridge penalty");
    IrlsState state;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(problem.p());
    update_working_response(state, problem, null_intercept(problem), zero, weight_floor);
    intercept_update(state, 0.0);
    double lmax = 0.0;
    for (int j = 0; j < problem.p(); ++j) {
        const double z = (state.ow.array() * problem.X.col(j).array() * state.r.array()).sum();
        lmax = std::max(lmax, std::abs(z / problem.n) / (alpha * spec.weights[j]));
    }
    // Inflate by a few ulps so rounding in the solver cannot leave a
    // coefficient marginally outside the dead zone.
    return lmax * (1.0 + 1e-12);
}

namespace {

class StackedSolver
{
public:
    StackedSolver(const StackedProblem& problem, const PenaltySpec& spec, double lambda,
                  const SolverControls& controls)
        : prob_(problem), spec_(spec), lambda_(lambda), ctl_(controls)
    {
        const double alpha = spec.mixing();
        threshold_ = lambda * alpha * spec.weights.array();
        ridge_ = 2.0 * lambda * (1.0 - alpha);
    }

    StackedFit run(double mu, Eigen::VectorXd beta)
    {
        StackedFit fit;
        double obj = stacked_objective(prob_, spec_, lambda_, mu, beta);
        fit.objective_trace.push_back(obj);
        for (int outer = 1; outer <= ctl_.max_outer; ++outer) {
            outer_ = outer;
            fit.n_outer = outer;
            update_working_response(state_, prob_, mu, beta, ctl_.weight_floor);
            xw2_.resize(prob_.p());
            for (int j = 0; j < prob_.p(); ++j) xw2_[j] = weighted_column_norm(state_, prob_, j);

            double new_mu = mu;
            Eigen::VectorXd new_beta = beta;
            const bool inner_ok = inner_loop(new_mu, new_beta, fit.n_inner);
            double new_obj = stacked_objective(prob_, spec_, lambda_, new_mu, new_beta);

            if (prob_.family == Family::Gaussian) {
                fit.objective_trace.push_back(new_obj);
                mu = new_mu;
                beta = std::move(new_beta);
                fit.converged = inner_ok;
                break;
            }

            // Backtrack toward the previous iterate if the Newton-type step
            // overshoots on the true objective.
            bool improved = accepts(new_obj, obj);
            for (int halving = 0; !improved && halving < 30; ++halving) {
                new_mu = 0.5 * (new_mu + mu);
                new_beta = 0.5 * (new_beta + beta);
                new_obj = stacked_objective(prob_, spec_, lambda_, new_mu, new_beta);
                improved = accepts(new_obj, obj);
            }
            if (!improved) {
                fit.objective_trace.push_back(obj);
                fit.converged = inner_ok;
                break;
            }
            double change = std::abs(new_mu - mu);
            if (beta.size() > 0) change = std::max(change, (new_beta - beta).cwiseAbs().maxCoeff());
            mu = new_mu;
            beta = std::move(new_beta);
            obj = new_obj;
            fit.objective_trace.push_back(obj);
            if (change < ctl_.tolerance && inner_ok) {
                fit.converged = true;
                break;
            }
        }
        fit.mu = mu;
        fit.beta = std::move(beta);
        for (int j = 0; j < prob_.p(); ++j) {
            if (fit.beta[j] != 0.0) fit.active_set.push_back(j);
        }
        return fit;
    }

private:
    static bool accepts(double candidate, double current)
    {
        return candidate <= current + 1e-13 * std::abs(current);
    }

    // Coordinate descent on the quadratic surrogate. Alternates one full
    // sweep with sweeps restricted to the nonzero coordinates; a coordinate
    // that hits zero leaves the working set until the next full sweep.
    // Converged once a full sweep moves nothing by more than the tolerance.
    bool inner_loop(double& mu, Eigen::VectorXd& beta, int& sweeps)
    {
        std::vector<int> working;
        int local = 0;
        while (local < ctl_.max_sweeps) {
            double delta = sweep_all(mu, beta);
            ++local;
            if (delta < ctl_.tolerance) {
                sweeps += local;
                return true;
            }
            working.clear();
            for (int j = 0; j < prob_.p(); ++j) {
                if (beta[j] != 0.0) working.push_back(j);
            }
            while (local < ctl_.max_sweeps) {
                delta = sweep_working(mu, beta, working);
                ++local;
                if (delta < ctl_.tolerance) break;
            }
        }
        sweeps += local;
        return false;
    }

    double update_intercept(double& mu, const Eigen::VectorXd& beta)
    {
        const double updated = intercept_update(state_, mu);
        const double delta = std::abs(updated - mu);
        mu = updated;
        notify(-1, mu, beta);
        return delta;
    }

    double update_coordinate(int j, double mu, Eigen::VectorXd& beta)
    {
        const double updated = coefficient_update(state_, prob_, j, beta[j], xw2_[j], threshold_[j], ridge_);
        const double delta = std::abs(updated - beta[j]);
        beta[j] = updated;
        notify(j, mu, beta);
        return delta;
    }

    double sweep_all(double& mu, Eigen::VectorXd& beta)
    {
        double delta = update_intercept(mu, beta);
        for (int j = 0; j < prob_.p(); ++j) delta = std::max(delta, update_coordinate(j, mu, beta));
        return delta;
    }

    double sweep_working(double& mu, Eigen::VectorXd& beta, std::vector<int>& working)
    {
        double delta = update_intercept(mu, beta);
        std::size_t keep = 0;
        for (int j : working) {
            delta = std::max(delta, update_coordinate(j, mu, beta));
            if (beta[j] != 0.0) working[keep++] = j;
        }
        working.resize(keep);
        return delta;
    }

    void notify(int coordinate, double mu, const Eigen::VectorXd& beta)
    {
        if (!ctl_.observer) return;
        CoordinateEvent ev;
        ev.outer = outer_;
        ev.coordinate = coordinate;
        const double n = prob_.n;
        ev.surrogate = 0.5 / n * (state_.ow.array() * state_.r.array().square()).sum() +
                       lambda_ * penalty_value(spec_, beta);
        const Eigen::VectorXd fresh = state_.y_tilde - linear_predictor(prob_, mu, beta);
        ev.residual_drift = (fresh - state_.r).cwiseAbs().maxCoeff();
        ctl_.observer(ev);
    }

    const StackedProblem& prob_;
    const PenaltySpec& spec_;
    double lambda_;
    const SolverControls& ctl_;
    Eigen::ArrayXd threshold_;
    double ridge_ = 0.0;
    IrlsState state_;
    Eigen::VectorXd xw2_;
    int outer_ = 0;
};

} // namespace

StackedFit fit_stacked(const StackedProblem& problem, const PenaltySpec& spec, double lambda,
                       const SolverControls& controls, const StackedFit* warm_start)
{
    spec.validate(problem.p());
    if (spec.family == PenaltyFamily::GroupLasso) {
        throw std::invalid_argument("the stacked solver takes lasso or elastic-net penalties");
    }
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
    StackedSolver solver(problem, spec, lambda, controls);
    if (warm_start != nullptr && warm_start->beta.size() == problem.p()) {
        return solver.run(warm_start->mu, warm_start->beta);
    }
    return solver.run(null_intercept(problem), Eigen::VectorXd::Zero(problem.p()));
}

double kkt_residual(const StackedFit& fit, const StackedProblem& problem, const PenaltySpec& spec, double lambda)
{
    const auto grad = stacked_loss_gradient(problem, fit.mu, fit.beta);
    const double alpha = spec.mixing();
    double worst = std::abs(grad.intercept);
    for (int j = 0; j < problem.p(); ++j) {
        // Stationarity of -grad in terms of z_j / n.
        const double zn = -grad.beta[j];
        const double l1 = lambda * alpha * spec.weights[j];
        const double b = fit.beta[j];
        double v = 0.0;
        if (b != 0.0) {
            v = std::abs(zn - 2.0 * lambda * (1.0 - alpha) * b - l1 * (b > 0.0 ? 1.0 : -1.0));
        } else {
            v = std::max(0.0, std::abs(zn) - l1);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

} // namespace mivs
