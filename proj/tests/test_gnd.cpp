#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "bgnd/crps.hpp"
#include "bgnd/gnd.hpp"
#include "bgnd/rng.hpp"

namespace {

using bgnd::GndParams;

// Trapezoid integral of f over [lo, hi] with n panels.
template <class F>
double trapezoid(F f, double lo, double hi, int n) {
    const double h = (hi - lo) / n;
    double s = 0.5 * (f(lo) + f(hi));
    for (int i = 1; i < n; ++i) s += f(lo + i * h);
    return s * h;
}

// erf by its Maclaurin series; independent of the incomplete gamma code.
double erf_series(double x) {
    double sum = 0.0;
    double power = x;
    double fact = 1.0;
    for (int n = 0; n < 60; ++n) {
        if (n > 0) {
            power *= x * x;
            fact *= n;
        }
        const double term = power / (fact * (2 * n + 1));
        sum += (n % 2 == 0) ? term : -term;
    }
    return 2.0 / std::sqrt(std::numbers::pi) * sum;
}

template <class F>
double bisect(F f, double lo, double hi) {
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

double ks_distance(std::vector<double> xs, const GndParams& p) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = bgnd::gnd_cdf(xs[i], p);
        d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
    }
    return d;
}

}  // namespace

TEST(GndLogpdf, StandardNormalAtMode) {
    EXPECT_NEAR(bgnd::gnd_logpdf(0.0, {0.0, 1.0, 2.0}), -0.5 * std::log(2.0 * std::numbers::pi), 1e-12);
    EXPECT_NEAR(bgnd::gnd_logpdf(0.0, {0.0, 1.0, 2.0}), -0.9189385, 1e-7);
}

TEST(GndLogpdf, Laplace) {
    EXPECT_NEAR(bgnd::gnd_logpdf(1.0, {0.0, 1.0, 1.0}), std::log(0.5 * std::exp(-1.0)), 1e-12);
    EXPECT_NEAR(bgnd::gnd_logpdf(1.0, {0.0, 1.0, 1.0}), -1.6931472, 1e-7);
}

TEST(GndLogpdf, MatchesNumericallyNormalizedKernel) {
    const GndParams p{0.2, 1.3, 1.5};
    auto kernel = [&](double y) { return std::exp(-std::pow(std::abs(y - p.mu) / p.b, p.gamma) / p.gamma); };
    const double z = trapezoid(kernel, p.mu - 60.0 * p.b, p.mu + 60.0 * p.b, 400000);
    EXPECT_NEAR(bgnd::gnd_pdf(0.7, p), kernel(0.7) / z, 1e-9);
}

TEST(GndLogpdf, RejectsInvalidInput) {
    EXPECT_THROW(bgnd::gnd_logpdf(NAN, {}), std::domain_error);
    EXPECT_THROW(bgnd::gnd_logpdf(0.0, {0.0, 0.0, 2.0}), std::domain_error);
    EXPECT_THROW(bgnd::gnd_logpdf(0.0, {0.0, 1.0, 0.5}), std::domain_error);
    EXPECT_THROW(bgnd::gnd_logpdf(0.0, {INFINITY, 1.0, 2.0}), std::domain_error);
}

TEST(GndDensity, IntegratesToOne) {
    for (double g : {1.0, 1.5, 2.0, 4.0}) {
        const GndParams p{0.3, 0.8, g};
        // Split at mu: the gamma = 1 kink sits on a panel boundary.
        auto f = [&](double y) { return bgnd::gnd_pdf(y, p); };
        const double mass = trapezoid(f, p.mu - 50 * p.b, p.mu, 200000) +
                            trapezoid(f, p.mu, p.mu + 50 * p.b, 200000);
        EXPECT_NEAR(mass, 1.0, 1e-6) << "gamma=" << g;
    }
}

TEST(IncompleteGamma, Values) {
    EXPECT_NEAR(bgnd::reg_inc_gamma_lower(1.0, 2.0), 1.0 - std::exp(-2.0), 1e-14);
    EXPECT_NEAR(bgnd::reg_inc_gamma_lower(0.5, 1.0), erf_series(1.0), 1e-13);
    EXPECT_NEAR(bgnd::reg_inc_gamma_lower(0.5, 1.0), 0.8427008, 1e-7);
    EXPECT_EQ(bgnd::reg_inc_gamma_lower(3.0, 0.0), 0.0);
    EXPECT_EQ(bgnd::reg_inc_gamma_lower(3.0, INFINITY), 1.0);
    EXPECT_THROW(bgnd::reg_inc_gamma_lower(0.0, 1.0), std::domain_error);
    EXPECT_THROW(bgnd::reg_inc_gamma_lower(-1.0, 1.0), std::domain_error);
}

TEST(IncompleteGamma, ErfAcrossBranches) {
    // P(1/2, x^2) = erf(x); x^2 crosses the series / continued-fraction switch at 1.5.
    for (double x : {0.1, 0.5, 1.0, 1.2, 1.3, 2.0, 3.0}) {
        EXPECT_NEAR(bgnd::reg_inc_gamma_lower(0.5, x * x), std::erf(x), 2e-14) << x;
        EXPECT_NEAR(bgnd::reg_inc_gamma_upper(0.5, x * x), std::erfc(x), 1e-14 + 1e-12 * std::erfc(x)) << x;
    }
}

TEST(IncompleteGamma, MonotoneInX) {
    for (double a : {0.25, 0.5, 1.0, 3.0}) {
        double prev = 0.0;
        for (double x = 0.0; x < 30.0; x += 0.05) {
            const double v = bgnd::reg_inc_gamma_lower(a, x);
            EXPECT_GE(v, prev);
            EXPECT_LE(v, 1.0);
            prev = v;
        }
    }
}

TEST(GndCdf, Values) {
    EXPECT_EQ(bgnd::gnd_cdf(3.0, {3.0, 2.0, 1.7}), 0.5);
    EXPECT_NEAR(bgnd::gnd_cdf(1.96, {0.0, 1.0, 2.0}), 0.9750021, 1e-7);
    EXPECT_NEAR(bgnd::gnd_cdf(2.0, {0.0, 1.0, 1.0}), 1.0 - 0.5 * std::exp(-2.0), 1e-14);
    EXPECT_NEAR(bgnd::gnd_cdf(-2.0, {0.0, 1.0, 1.0}), 0.5 * std::exp(-2.0), 1e-15);
}

TEST(GndCdf, DerivativeMatchesPdf) {
    for (double g : {1.0, 1.5, 2.0, 4.0}) {
        const GndParams p{-0.4, 1.7, g};
        for (int i = 0; i < 100; ++i) {
            const double y = p.mu - 4.0 * p.b + 8.0 * p.b * (i + 0.37) / 100.0;
            const double h = 1e-5;
            const double fd = (bgnd::gnd_cdf(y + h, p) - bgnd::gnd_cdf(y - h, p)) / (2 * h);
            EXPECT_NEAR(fd, bgnd::gnd_pdf(y, p), 1e-6) << "gamma=" << g << " y=" << y;
        }
    }
}

TEST(GndQuantile, Values) {
    EXPECT_EQ(bgnd::gnd_quantile(0.5, {3.0, 2.0, 1.7}), 3.0);
    EXPECT_NEAR(bgnd::gnd_quantile(0.975, {0.0, 1.0, 2.0}), 1.959964, 1e-6);
    const GndParams p{0.0, 1.0, 4.0};
    const double oracle = bisect([&](double y) { return bgnd::gnd_cdf(y, p) - 0.9; }, 0.0, 10.0);
    EXPECT_NEAR(bgnd::gnd_quantile(0.9, p), oracle, 1e-10);
    EXPECT_NEAR(bgnd::gnd_cdf(bgnd::gnd_quantile(0.9, p), p), 0.9, 1e-10);
    EXPECT_THROW(bgnd::gnd_quantile(0.0, p), std::domain_error);
    EXPECT_THROW(bgnd::gnd_quantile(1.0, p), std::domain_error);
}

TEST(GndQuantile, RoundTripOnFiveScaleUnits) {
    // Left of mu the CDF carries full relative precision; right of mu the
    // survival function does (the CDF itself rounds to 1 in the far tail).
    for (double g : {1.0, 1.5, 2.0, 4.0}) {
        const GndParams p{1.5, 0.7, g};
        for (int i = 0; i <= 200; ++i) {
            const double y = p.mu - 5.0 * p.b + 10.0 * p.b * i / 200.0;
            if (y == p.mu) continue;
            const double back = y < p.mu ? bgnd::gnd_quantile(bgnd::gnd_cdf(y, p), p)
                                         : bgnd::gnd_isf(bgnd::gnd_sf(y, p), p);
            EXPECT_NEAR(back, y, 1e-8) << "gamma=" << g;
        }
    }
}

TEST(GndQuantile, CdfOfQuantileIsIdentity) {
    for (double g : {1.0, 1.5, 2.0, 4.0}) {
        const GndParams p{-2.0, 3.0, g};
        for (int i = 1; i < 1000; ++i) {
            const double q = i / 1000.0;
            EXPECT_NEAR(bgnd::gnd_cdf(bgnd::gnd_quantile(q, p), p), q, 1e-12);
        }
        EXPECT_NEAR(bgnd::gnd_cdf(bgnd::gnd_quantile(1e-200, p), p) / 1e-200, 1.0, 1e-10);
    }
}

TEST(GndSample, NormalMoments) {
    const auto xs = bgnd::gnd_sample(100000, {0.0, 1.0, 2.0}, 1);
    double m = 0.0, s = 0.0;
    for (double x : xs) m += x;
    m /= xs.size();
    for (double x : xs) s += (x - m) * (x - m);
    s = std::sqrt(s / xs.size());
    EXPECT_NEAR(m, 0.0, 0.02);
    EXPECT_NEAR(s, 1.0, 0.02);
}

TEST(GndSample, LaplaceMedian) {
    auto xs = bgnd::gnd_sample(100000, {5.0, 2.0, 1.0}, 7);
    std::nth_element(xs.begin(), xs.begin() + xs.size() / 2, xs.end());
    EXPECT_NEAR(xs[xs.size() / 2], 5.0, 0.05);
}

TEST(GndSample, KolmogorovDistance) {
    for (double g : {1.0, 1.5, 2.0, 4.0}) {
        const GndParams p{0.0, 1.0, g};
        const double d = ks_distance(bgnd::gnd_sample(100000, p, 3), p);
        EXPECT_LT(d, 1.63 / std::sqrt(100000.0)) << "gamma=" << g;
    }
}

TEST(GndSample, DeterministicPerSeed) {
    EXPECT_EQ(bgnd::gnd_sample(50, {1.0, 2.0, 1.5}, 9), bgnd::gnd_sample(50, {1.0, 2.0, 1.5}, 9));
    EXPECT_NE(bgnd::gnd_sample(50, {1.0, 2.0, 1.5}, 9), bgnd::gnd_sample(50, {1.0, 2.0, 1.5}, 10));
    EXPECT_THROW(bgnd::gnd_sample(0, {}, 1), std::invalid_argument);
}

TEST(CrpsNormal, Values) {
    const double expect = (std::sqrt(2.0) - 1.0) / std::sqrt(std::numbers::pi);
    EXPECT_NEAR(bgnd::crps_normal(0.0, 1.0, 0.0), expect, 1e-15);
    EXPECT_NEAR(bgnd::crps_normal(0.0, 1.0, 0.0), 0.2336950, 1e-7);
    auto q = [](double a) { return bgnd::gnd_quantile(a, {0.0, 1.0, 2.0}); };
    EXPECT_NEAR(bgnd::crps_quadrature(q, 0.0, 1 << 14), expect, 1e-6);
    // Ten sd out, the midpoint rule's tail error at 2^14 levels is ~1e-5.
    EXPECT_NEAR(bgnd::crps_quadrature(q, 10.0, 1 << 14), bgnd::crps_normal(0.0, 1.0, 10.0), 1e-5);
    EXPECT_GT(bgnd::crps_normal(0.0, 1.0, 10.0), 9.43);
    EXPECT_LT(bgnd::crps_normal(0.0, 1.0, 10.0), 9.44);
    EXPECT_LT(bgnd::crps_normal(2.0, 1e-9, 2.0), 1e-9);
    EXPECT_THROW(bgnd::crps_normal(0.0, 0.0, 1.0), std::domain_error);
}

TEST(CrpsQuadrature, DegenerateForecastScoresZero) {
    EXPECT_EQ(bgnd::crps_quadrature([](double) { return 3.25; }, 3.25, 256), 0.0);
}

TEST(CrpsQuadrature, ExponentialMatchesCdfIntegral) {
    auto q = [](double a) { return -std::log1p(-a); };
    auto below = [](double t) { return std::pow(1.0 - std::exp(-t), 2); };
    auto above = [](double t) { return std::exp(-2.0 * t); };
    const double direct = trapezoid(below, 0.0, 1.0, 200000) + trapezoid(above, 1.0, 60.0, 2000000);
    EXPECT_NEAR(bgnd::crps_quadrature(q, 1.0, 1 << 14), direct, 1e-6);
    EXPECT_NEAR(bgnd::crps_exponential(1.0, 1.0), direct, 1e-8);
}

TEST(CrpsQuadrature, RejectsNonMonotoneQuantiles) {
    EXPECT_THROW(bgnd::crps_quadrature([](double a) { return -a; }, 0.0, 128), bgnd::ContractError);
    EXPECT_THROW(bgnd::crps_quadrature([](double a) { return a; }, 0.0, 16), std::invalid_argument);
}

TEST(CrpsClosedForms, AgreeWithQuadratureOnRandomInstances) {
    bgnd::Rng rng(42);
    for (int i = 0; i < 50; ++i) {
        const double mu = 4.0 * rng.uniform() - 2.0;
        const double sigma = 0.2 + 2.0 * rng.uniform();
        const double y = mu + sigma * (6.0 * rng.uniform() - 3.0);
        auto qn = [&](double a) { return bgnd::gnd_quantile(a, {mu, sigma, 2.0}); };
        EXPECT_NEAR(bgnd::crps_normal(mu, sigma, y), bgnd::crps_quadrature(qn, y, 1 << 14), 1e-6);
        auto ql = [&](double a) { return bgnd::gnd_quantile(a, {mu, sigma, 1.0}); };
        EXPECT_NEAR(bgnd::crps_laplace(mu, sigma, y), bgnd::crps_quadrature(ql, y, 1 << 14), 1e-6);
    }
}

TEST(CrpsClosedForms, ExponentialTwoWays) {
    bgnd::Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const double rate = 0.1 + 2.0 * rng.uniform();
        const double y = 3.0 * rng.uniform() / rate;
        auto q = [&](double a) { return -std::log1p(-a) / rate; };
        EXPECT_NEAR(bgnd::crps_exponential(rate, y), bgnd::crps_quadrature(q, y, 1 << 14), 1e-6 / rate);
    }
}
