#pragma once

// Generalized Normal Distribution (exponential power family):
//
//   p(y; mu, b, gamma) = exp(-|y - mu|^gamma / (gamma b^gamma))
//                        / (2 gamma^(1/gamma) Gamma(1 + 1/gamma) b)
//
// gamma = 1 is the Laplace law with scale b, gamma = 2 the normal law with
// standard deviation b. |Y - mu|^gamma / (gamma b^gamma) ~ Gamma(1/gamma, 1),
// which is what the CDF, quantile and sampler below are built on.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "bgnd/error.hpp"
#include "bgnd/rng.hpp"

namespace bgnd {

struct GndParams {
    double mu = 0.0;
    double b = 1.0;
    double gamma = 2.0;
};

inline void validate(const GndParams& p) {
    if (!std::isfinite(p.mu))
        throw std::domain_error("GND location must be finite");
    if (!(p.b > 0.0) || !std::isfinite(p.b))
        throw std::domain_error("GND scale must be positive and finite, got " + std::to_string(p.b));
    if (!(p.gamma >= 1.0) || !std::isfinite(p.gamma))
        throw std::domain_error("GND shape must be >= 1, got " + std::to_string(p.gamma));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------------------
// Regularized incomplete gamma
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr int kGammaMaxTerms = 500;
inline constexpr double kGammaTol = 1e-14;

// log of x^a e^-x / Gamma(a)
inline double gamma_prefactor_log(double a, double x) {
    return a * std::log(x) - x - std::lgamma(a);
}

// P(a, x) by power series; use for x < a + 1.
inline double inc_gamma_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n <= kGammaMaxTerms; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kGammaTol) break;
    }
    return std::exp(gamma_prefactor_log(a, x)) * sum;
}

// Q(a, x) by modified Lentz continued fraction; use for x >= a + 1.
inline double inc_gamma_cf(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kGammaMaxTerms; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kGammaTol) break;
    }
    return std::exp(gamma_prefactor_log(a, x)) * h;
}

inline void check_inc_gamma_args(double a, double x) {
    if (!(a > 0.0) || !std::isfinite(a))
        throw std::domain_error("incomplete gamma: shape must be positive");
    if (!(x >= 0.0) || std::isnan(x))
        throw std::domain_error("incomplete gamma: argument must be non-negative");
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x).
inline double reg_inc_gamma_lower(double a, double x) {
    detail::check_inc_gamma_args(a, x);
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return std::min(1.0, detail::inc_gamma_series(a, x));
    return std::clamp(1.0 - detail::inc_gamma_cf(a, x), 0.0, 1.0);
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), accurate in the
/// right tail.
inline double reg_inc_gamma_upper(double a, double x) {
    detail::check_inc_gamma_args(a, x);
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return std::clamp(1.0 - detail::inc_gamma_series(a, x), 0.0, 1.0);
    return std::min(1.0, detail::inc_gamma_cf(a, x));
}

namespace detail {

// Solve P(a, t) = target (upper == false) or Q(a, t) = target (upper == true)
// for t. Works on log P / log Q so tiny tail targets keep relative accuracy.
// Newton steps inside a maintained bracket, bisection when Newton leaves it.
inline double invert_inc_gamma(double a, double target, bool upper) {
    auto tail = [&](double t) {
        return upper ? reg_inc_gamma_upper(a, t) : reg_inc_gamma_lower(a, t);
    };
    const double log_target = std::log(target);

    double lo = 0.0;
    double hi = std::max(1.0, a);
    for (int i = 0; i < 2000; ++i) {
        const double s = tail(hi);
        if (upper ? s <= target : s >= target) break;
        lo = hi;
        hi *= 2.0;
    }

    double t;
    if (upper) {
        t = -std::log(target) - std::lgamma(a);
        if (t > 1.0) t += (a - 1.0) * std::log(t);
    } else {
        t = std::pow(target * std::tgamma(a + 1.0), 1.0 / a);
    }
    if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);

    for (int iter = 0; iter < 300; ++iter) {
        const double s = tail(t);
        if (s <= 0.0) {
            // Underflowed: t is far past the root on the Q side, or before it on P.
            if (upper) hi = t; else lo = t;
            t = 0.5 * (lo + hi);
            continue;
        }
        const double f = std::log(s) - log_target;
        if (f == 0.0) return t;
        const bool root_above = upper ? (f > 0.0) : (f < 0.0);
        if (root_above) lo = t; else hi = t;

        const double dens = std::exp(gamma_prefactor_log(a, t)) / t;
        const double slope = (upper ? -dens : dens) / s;
        double next = (slope != 0.0 && std::isfinite(slope)) ? t - f / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) <= 4.0 * std::numeric_limits<double>::epsilon() * t) return next;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return next;
        t = next;
    }
    return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Density, CDF, quantile
// ---------------------------------------------------------------------------

/// log(2 gamma^(1/gamma) Gamma(1 + 1/gamma)): the density normalizer at b = 1.
inline double gnd_log_normalizer(double gamma) {
    return std::log(2.0) + std::log(gamma) / gamma + std::lgamma(1.0 + 1.0 / gamma);
}

inline double gnd_logpdf(double y, const GndParams& p) {
    validate(p);
    if (!std::isfinite(y)) throw std::domain_error("gnd_logpdf: y must be finite");
    const double z = std::abs(y - p.mu) / p.b;
    return -gnd_log_normalizer(p.gamma) - std::log(p.b) - std::pow(z, p.gamma) / p.gamma;
}

inline double gnd_pdf(double y, const GndParams& p) { return std::exp(gnd_logpdf(y, p)); }

inline double gnd_cdf(double y, const GndParams& p) {
    validate(p);
    if (std::isnan(y)) throw std::domain_error("gnd_cdf: y is NaN");
    if (y == p.mu) return 0.5;
    const double a = 1.0 / p.gamma;
    const double t = std::pow(std::abs(y - p.mu) / p.b, p.gamma) / p.gamma;
    // Near the center P is the accurate quantity, in the tails Q is.
    if (t < a + 1.0) {
        const double half_p = 0.5 * reg_inc_gamma_lower(a, t);
        return y > p.mu ? 0.5 + half_p : 0.5 - half_p;
    }
    const double tail = 0.5 * reg_inc_gamma_upper(a, t);
    return y > p.mu ? 1.0 - tail : tail;
}

/// Survival function 1 - F(y), computed without cancellation in the right tail.
inline double gnd_sf(double y, const GndParams& p) {
    validate(p);
    return gnd_cdf(2.0 * p.mu - y, p);
}

/// Upper-tail point of the standard GND(0, 1, gamma): w >= 0 with
/// P(W > w) = s, for s in (0, 1/2].
inline double gnd_standard_upper_point(double s, double gamma) {
    if (s >= 0.5) return 0.0;
    const double a = 1.0 / gamma;
    const double r = 2.0 * s;  // Q(a, t) = r
    const double t = r <= 0.5 ? detail::invert_inc_gamma(a, r, true)
                              : detail::invert_inc_gamma(a, 1.0 - r, false);
    return std::pow(gamma * t, 1.0 / gamma);
}

inline double gnd_quantile(double q, const GndParams& p) {
    validate(p);
    if (!(q > 0.0 && q < 1.0))
        throw std::domain_error("gnd_quantile: probability must be in (0, 1)");
    if (q == 0.5) return p.mu;
    if (q < 0.5) return p.mu - p.b * gnd_standard_upper_point(q, p.gamma);
    return p.mu + p.b * gnd_standard_upper_point(1.0 - q, p.gamma);
}

/// Inverse survival function: y with gnd_sf(y) = s.
inline double gnd_isf(double s, const GndParams& p) {
    validate(p);
    if (!(s > 0.0 && s < 1.0))
        throw std::domain_error("gnd_isf: probability must be in (0, 1)");
    if (s == 0.5) return p.mu;
    if (s < 0.5) return p.mu + p.b * gnd_standard_upper_point(s, p.gamma);
    return p.mu - p.b * gnd_standard_upper_point(1.0 - s, p.gamma);
}

/// Single standard GND(0, 1, gamma) draw from an existing generator.
inline double gnd_standard_draw(Rng& rng, double gamma) {
    const double t = rng.gamma(1.0 / gamma);
    const double w = std::pow(gamma * t, 1.0 / gamma);
    return rng.coin() ? w : -w;
}

/// n i.i.d. draws: T ~ Gamma(1/gamma, 1), |W| = (gamma T)^(1/gamma) with a
/// random sign, returned as mu + b W.
inline std::vector<double> gnd_sample(std::size_t n, const GndParams& p, std::uint64_t seed) {
    validate(p);
    if (n == 0) throw std::invalid_argument("gnd_sample: n must be >= 1");
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& v : out) v = p.mu + p.b * gnd_standard_draw(rng, p.gamma);
    return out;
}

}  // namespace bgnd
