#pragma once

// Continuous ranked probability score.
//
//   CRPS(F, y) = integral (F(t) - 1{t >= y})^2 dt
//              = integral_0^1 2 L_alpha(y, F^-1(alpha)) d alpha
//
// with L_alpha the pinball loss. The quantile form is the generic oracle;
// the closed forms cover the normal, log-normal, Laplace and exponential cases.

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "bgnd/error.hpp"
#include "bgnd/gnd.hpp"

namespace bgnd {

inline constexpr std::size_t kDefaultCrpsLevels = 4096;

inline double pinball_loss(double y, double yhat, double alpha) {
    return y >= yhat ? alpha * (y - yhat) : (1.0 - alpha) * (yhat - y);
}

inline double crps_normal(double mu, double sigma, double y) {
    if (!(sigma > 0.0)) throw std::domain_error("crps_normal: sigma must be positive");
    const double z = (y - mu) / sigma;
    return sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) -
                    1.0 / std::sqrt(std::numbers::pi));
}

/// Log-normal with log-scale mean mu and log-scale sd sigma, observed at y.
inline double crps_lognormal(double mu, double sigma, double y) {
    if (!(sigma > 0.0)) throw std::domain_error("crps_lognormal: sigma must be positive");
    const double mean = std::exp(mu + 0.5 * sigma * sigma);
    const double half_pair = mean * (2.0 * normal_cdf(sigma / std::numbers::sqrt2) - 1.0);
    if (y <= 0.0) return mean - y - half_pair;
    const double z = (std::log(y) - mu) / sigma;
    return y * (2.0 * normal_cdf(z) - 1.0) -
           2.0 * mean * (normal_cdf(z - sigma) + normal_cdf(sigma / std::numbers::sqrt2) - 1.0);
}

inline double crps_laplace(double mu, double b, double y) {
    if (!(b > 0.0)) throw std::domain_error("crps_laplace: scale must be positive");
    const double d = std::abs(y - mu);
    return d + b * std::exp(-d / b) - 0.75 * b;
}

/// Exponential with the given rate.
inline double crps_exponential(double rate, double y) {
    if (!(rate > 0.0)) throw std::domain_error("crps_exponential: rate must be positive");
    if (y < 0.0) return 0.5 / rate - y;
    return y + (2.0 * std::exp(-rate * y) - 1.5) / rate;
}

/// CRPS by midpoint quadrature of the quantile decomposition over `levels`
/// equally spaced probability levels.
template <std::invocable<double> QuantileFn>
double crps_quadrature(QuantileFn&& quantile_fn, double y, std::size_t levels = kDefaultCrpsLevels) {
    if (levels < 64) throw std::invalid_argument("crps_quadrature: need at least 64 levels");
    const double h = 1.0 / static_cast<double>(levels);
    double sum = 0.0;
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < levels; ++k) {
        const double alpha = (static_cast<double>(k) + 0.5) * h;
        const double q = quantile_fn(alpha);
        if (q < prev)
            throw ContractError("crps_quadrature: quantile function decreases at level " +
                                std::to_string(alpha));
        prev = q;
        sum += pinball_loss(y, q, alpha);
    }
    return 2.0 * sum * h;
}

/// Standard GND(0, 1, gamma) quantiles at the midpoint levels of a quadrature
/// grid. Shared across forecasts with the same shape, so quadrature CRPS for
/// location-scale pushforwards costs one pass over the grid per row.
class QuantileGrid {
public:
    QuantileGrid(double gamma, std::size_t levels) : gamma_(gamma), alphas_(levels), z_(levels) {
        if (levels < 64) throw std::invalid_argument("QuantileGrid: need at least 64 levels");
        validate(GndParams{0.0, 1.0, gamma});
        const double h = 1.0 / static_cast<double>(levels);
        for (std::size_t k = 0; k < levels; ++k) {
            alphas_[k] = (static_cast<double>(k) + 0.5) * h;
            z_[k] = gnd_quantile(alphas_[k], GndParams{0.0, 1.0, gamma});
        }
    }

    double gamma() const { return gamma_; }
    std::size_t levels() const { return z_.size(); }
    const std::vector<double>& alphas() const { return alphas_; }
    const std::vector<double>& standard_quantiles() const { return z_; }

private:
    double gamma_;
    std::vector<double> alphas_;
    std::vector<double> z_;
};

}  // namespace bgnd
