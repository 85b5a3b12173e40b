#include <mivs/penalty.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace mivs {

PenaltySpec PenaltySpec::lasso(int p)
{
    PenaltySpec s;
    s.family = PenaltyFamily::Lasso;
    s.alpha = 1.0;
    s.weights = Eigen::VectorXd::Ones(p);
    return s;
}

PenaltySpec PenaltySpec::elastic_net(double alpha, int p)
{
    PenaltySpec s;
    s.family = PenaltyFamily::ElasticNet;
    s.alpha = alpha;
    s.weights = Eigen::VectorXd::Ones(p);
    s.validate(p);
    return s;
}

PenaltySpec PenaltySpec::group_lasso(int p)
{
    PenaltySpec s;
    s.family = PenaltyFamily::GroupLasso;
    s.weights = Eigen::VectorXd::Ones(p);
    return s;
}

PenaltySpec PenaltySpec::with_adaptive_weights(Eigen::VectorXd a, double g) const
{
    PenaltySpec s = *this;
    s.adaptive = true;
    s.weights = std::move(a);
    s.gamma = g;
    s.validate(static_cast<int>(s.weights.size()));
    return s;
}

void PenaltySpec::validate(int p) const
{
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (weights.size() != p) {
        throw std::invalid_argument("expected " + std::to_string(p) + " penalty weights, got " +
                                    std::to_string(weights.size()));
    }
    if (!weights.allFinite() || (weights.array() <= 0.0).any()) {
        throw std::invalid_argument("penalty weights must be finite and positive");
    }
    if (!adaptive && (weights.array() != 1.0).any()) {
        throw std::invalid_argument("non-adaptive penalties use unit weights");
    }
}

double gamma_from_ratio(double v)
{
    if (!(v >= 0.0) || v >= 1.0) {
        throw std::invalid_argument("gamma rule needs 0 <= v < 1, got v = " + std::to_string(v));
    }
    return std::ceil(2.0 * v / (1.0 - v)) + 1.0;
}

double stacked_gamma(int p, int n, int D)
{
    return gamma_from_ratio(std::log(static_cast<double>(p)) / std::log(static_cast<double>(n) * D));
}

double grouped_gamma(int p, int n, int D)
{
    return gamma_from_ratio(std::log(static_cast<double>(p) * D) / std::log(static_cast<double>(n) * D));
}

namespace {

Eigen::VectorXd weights_from_magnitudes(const Eigen::VectorXd& magnitude, int n, int D, double gamma)
{
    const double offset = 1.0 / (static_cast<double>(n) * D);
    Eigen::VectorXd a(magnitude.size());
    for (Eigen::Index j = 0; j < magnitude.size(); ++j) {
        a[j] = std::min(std::pow(magnitude[j] + offset, -gamma), kMaxAdaptiveWeight);
    }
    return a;
}

} // namespace

Eigen::VectorXd adaptive_weights_stacked(const Eigen::VectorXd& initial_beta, int n, int D, double gamma)
{
    return weights_from_magnitudes(initial_beta.cwiseAbs(), n, D, gamma);
}

Eigen::VectorXd adaptive_weights_grouped(const Eigen::MatrixXd& initial_betas, int n, int D, double gamma)
{
    return weights_from_magnitudes(initial_betas.colwise().norm().transpose(), n, D, gamma);
}

double penalty_value(const PenaltySpec& spec, const Eigen::VectorXd& beta)
{
    if (spec.family == PenaltyFamily::GroupLasso) {
        // A single imputation: each group is a scalar.
        return penalty_value(spec, Eigen::MatrixXd(beta.transpose()));
    }
    if (beta.size() != spec.weights.size()) throw std::invalid_argument("coefficient length mismatch");
    const double a = spec.mixing();
    return a * spec.weights.dot(beta.cwiseAbs()) + (1.0 - a) * beta.squaredNorm();
}

double penalty_value(const PenaltySpec& spec, const Eigen::MatrixXd& beta)
{
    if (spec.family != PenaltyFamily::GroupLasso) {
        throw std::invalid_argument("matrix coefficients require the group penalty");
    }
    if (beta.cols() != spec.weights.size()) throw std::invalid_argument("coefficient shape mismatch");
    return spec.weights.dot(beta.colwise().norm().transpose());
}

} // namespace mivs
