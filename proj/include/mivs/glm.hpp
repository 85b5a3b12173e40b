#pragma once
#include <mivs/data.hpp>

#include <cmath>

namespace mivs::glm {

inline double sigmoid(double eta)
{
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow.
inline double log1pexp(double eta)
{
    return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

// Negative log-likelihood contribution of one row: -y eta + log(1 + e^eta)
// for binomial, (y - eta)^2 / 2 for gaussian.
inline double loss(Family family, double y, double eta)
{
    if (family == Family::Binomial) return -y * eta + log1pexp(eta);
    const double e = y - eta;
    return 0.5 * e * e;
}

// d loss / d eta
inline double loss_derivative(Family family, double y, double eta)
{
    return family == Family::Binomial ? sigmoid(eta) - y : eta - y;
}

// Binomial deviance or squared error, used as the validation error.
inline double prediction_error(Family family, double y, double eta)
{
    if (family == Family::Binomial) return 2.0 * loss(family, y, eta);
    const double e = y - eta;
    return e * e;
}

} // namespace mivs::glm
