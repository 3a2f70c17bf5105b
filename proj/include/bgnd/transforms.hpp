#pragma once

// Power transforms carrying a positive response onto a (near-)normal scale.
// power = 0 is log, 0.25 the fourth root, 1 the identity. A pure power is used
// instead of (y^l - 1) / l: the two differ by an affine map and the GND family
// is closed under location-scale maps, so original-scale forecasts coincide.
//
// The identity is treated as a map on the whole real line (no positivity
// requirement, no clipping); every other power needs y > 0.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "bgnd/crps.hpp"
#include "bgnd/gnd.hpp"

namespace bgnd {

/// Counts transformed-scale values that fell outside the invertible range
/// and were clipped to the support boundary.
struct ClipCounter {
    std::size_t count = 0;
};

class PowerTransform {
public:
    constexpr PowerTransform() = default;
    explicit PowerTransform(double power) : power_(power) {
        if (!(power >= 0.0) || !std::isfinite(power))
            throw std::domain_error("PowerTransform: power must be >= 0");
    }

    static PowerTransform log() { return PowerTransform(0.0); }
    static PowerTransform fourth_root() { return PowerTransform(0.25); }
    static PowerTransform identity() { return PowerTransform(1.0); }

    double power() const { return power_; }
    bool is_log() const { return power_ == 0.0; }
    bool is_identity() const { return power_ == 1.0; }
    bool requires_positive() const { return !is_identity(); }

    double forward(double y) const {
        if (is_identity()) return y;
        if (!(y > 0.0))
            throw std::domain_error("PowerTransform::forward: response must be > 0, got " +
                                    std::to_string(y));
        return is_log() ? std::log(y) : std::pow(y, power_);
    }

    double inverse(double z, ClipCounter* clips = nullptr) const {
        if (is_identity()) return z;
        if (is_log()) return std::exp(z);
        if (z < 0.0) {
            if (clips) ++clips->count;
            return 0.0;
        }
        return std::pow(z, 1.0 / power_);
    }

    friend bool operator==(const PowerTransform&, const PowerTransform&) = default;

private:
    double power_ = 1.0;
};

inline double pushforward_cdf(const PowerTransform& t, const GndParams& p, double y) {
    return gnd_cdf(t.forward(y), p);
}

/// 1 - pushforward_cdf, without cancellation in the upper tail.
inline double pushforward_sf(const PowerTransform& t, const GndParams& p, double y) {
    return gnd_sf(t.forward(y), p);
}

inline double pushforward_quantile(const PowerTransform& t, const GndParams& p, double q,
                                   ClipCounter* clips = nullptr) {
    return t.inverse(gnd_quantile(q, p), clips);
}

/// Original-scale CRPS by quantile quadrature on a prebuilt standard grid.
inline double pushforward_crps(const PowerTransform& t, const GndParams& p, double y,
                               const QuantileGrid& grid) {
    validate(p);
    if (grid.gamma() != p.gamma)
        throw std::invalid_argument("pushforward_crps: grid shape does not match forecast shape");
    if (t.requires_positive() && !(y > 0.0))
        throw std::domain_error("pushforward_crps: observation must be > 0");
    const auto& alphas = grid.alphas();
    const auto& z = grid.standard_quantiles();
    double sum = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k)
        sum += pinball_loss(y, t.inverse(p.mu + p.b * z[k]), alphas[k]);
    return 2.0 * sum / static_cast<double>(z.size());
}

inline double pushforward_crps(const PowerTransform& t, const GndParams& p, double y,
                               std::size_t levels = kDefaultCrpsLevels) {
    return pushforward_crps(t, p, y, QuantileGrid(p.gamma, levels));
}

}  // namespace bgnd
