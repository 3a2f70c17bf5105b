#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "bgnd/eval.hpp"
#include "bgnd/rng.hpp"

TEST(Pinball, Examples) {
    EXPECT_DOUBLE_EQ(bgnd::pinball_loss(1.0, 0.0, 0.7), 0.7);
    EXPECT_DOUBLE_EQ(bgnd::pinball_loss(0.0, 1.0, 0.7), 0.3);
    EXPECT_EQ(bgnd::pinball_loss(2.5, 2.5, 0.7), 0.0);
}

TEST(Pinball, GridMinimizerIsEmpiricalQuantile) {
    bgnd::Rng rng(1);
    std::vector<double> y(999);
    for (auto& v : y) v = std::exp(rng.normal());
    std::vector<double> sorted = y;
    std::sort(sorted.begin(), sorted.end());
    const double q70 = sorted[static_cast<std::size_t>(std::ceil(0.7 * y.size())) - 1];
    const double step = 1e-3;
    double best = 0, best_loss = INFINITY;
    for (double c = 0; c < 10; c += step) {
        double s = 0;
        for (double v : y) s += bgnd::pinball_loss(v, c, 0.7);
        if (s < best_loss) {
            best_loss = s;
            best = c;
        }
    }
    EXPECT_LE(std::abs(best - q70), step);
}

TEST(CostRatio, SeventyPercentIsTwoPointThree) {
    EXPECT_NEAR(bgnd::cost_ratio(0.7), 7.0 / 3.0, 1e-15);
    EXPECT_EQ(bgnd::round_sig(bgnd::cost_ratio(0.7)), 2.3);
    EXPECT_EQ(bgnd::round_sig(3245.76), 3200.0);
    EXPECT_EQ(bgnd::round_sig(-0.01234), -0.012);
    EXPECT_THROW(bgnd::cost_ratio(1.0), std::invalid_argument);
}

TEST(CrpsMean, DegenerateAndStandardNormal) {
    std::vector<bgnd::Forecast> f{bgnd::Forecast::point(1.0), bgnd::Forecast::point(-2.0)};
    std::vector<double> y{1.0, -2.0};
    EXPECT_EQ(bgnd::crps_mean(f, y), 0.0);
    std::vector<bgnd::Forecast> g{bgnd::Forecast::gnd(bgnd::PowerTransform::identity(), {0, 1, 2})};
    EXPECT_NEAR(bgnd::crps_mean(g, std::vector<double>{0.0}), 0.2336950, 5e-8);
    EXPECT_THROW(bgnd::crps_mean(g, y), bgnd::InputError);
}

TEST(CrpsMean, EqualsPerRowAverage) {
    bgnd::Rng rng(2);
    std::vector<bgnd::Forecast> f;
    std::vector<double> y;
    for (int i = 0; i < 60; ++i) {
        switch (i % 4) {
            case 0: f.push_back(bgnd::Forecast::gnd(bgnd::PowerTransform::fourth_root(), {2.0, 0.3, 1.5})); break;
            case 1: f.push_back(bgnd::Forecast::gnd(bgnd::PowerTransform::log(), {1.0, 0.5, 2.0})); break;
            case 2: f.push_back(bgnd::Forecast::exponential(0.2)); break;
            default: f.push_back(bgnd::Forecast::point(4.0));
        }
        y.push_back(std::exp(1.0 + rng.normal()));
    }
    double s = 0;
    for (std::size_t i = 0; i < f.size(); ++i) s += f[i].crps(y[i]);
    EXPECT_NEAR(bgnd::crps_mean(f, y), s / f.size(), 1e-12);
}

TEST(Forecast, ExponentialPieces) {
    const auto f = bgnd::Forecast::exponential(0.5);
    EXPECT_NEAR(f.quantile(0.5), 2 * std::log(2.0), 1e-15);
    EXPECT_NEAR(f.sf(2.0), std::exp(-1.0), 1e-15);
    EXPECT_EQ(f.sf(-1.0), 1.0);
    EXPECT_EQ(bgnd::Forecast::point(3.0).sf(10.0), 0.0);
    EXPECT_EQ(bgnd::Forecast::point(30.0).sf(10.0), 1.0);
}

TEST(CrpsReduction, Antisymmetry) {
    const double a = 4.0, b = 5.0;
    EXPECT_DOUBLE_EQ(bgnd::crps_reduction_pct(b, a), 20.0);
    EXPECT_DOUBLE_EQ(bgnd::crps_reduction_pct(a, b), -25.0);
    // sign flips and magnitudes differ only by the benchmark normalization
    EXPECT_DOUBLE_EQ(bgnd::crps_reduction_pct(b, a) * b, -bgnd::crps_reduction_pct(a, b) * a);
}

TEST(LongWait, AllEqualAllLong) {
    const std::vector<double> p(40, 0.3);
    const std::vector<bool> actual(40, true);
    const std::vector<double> fr{0.05, 0.1, 0.25};
    for (const auto& r : bgnd::long_wait_analysis(p, actual, fr)) EXPECT_EQ(r.tpr, 1.0);
}

TEST(LongWait, PerfectRankingBelowPrevalence) {
    std::vector<double> p;
    std::vector<bool> actual;
    for (int i = 0; i < 100; ++i) {
        p.push_back(i / 100.0);
        actual.push_back(i >= 70);
    }
    const std::vector<double> fr{0.05, 0.1, 0.2, 0.3};
    const auto rows = bgnd::long_wait_analysis(p, actual, fr);
    for (const auto& r : rows) EXPECT_EQ(r.tpr, 1.0);
    EXPECT_EQ(rows[1].flagged, 10u);
    EXPECT_NEAR(rows[1].deaths_averted, 805000 * 0.1 * 0.028, 1e-9);
}

TEST(LongWait, MatchesExhaustiveEnumeration) {
    // p on a dyadic grid so subset sums are exact and ties are common
    bgnd::Rng rng(3);
    const std::size_t n = 20;
    std::vector<double> p(n);
    std::vector<bool> actual(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = static_cast<double>(rng.below(6)) / 8.0;
        actual[i] = rng.coin();
    }
    const std::vector<double> fr{0.05, 0.1, 0.15, 0.2, 0.25, 0.5};
    const auto rows = bgnd::long_wait_analysis(p, actual, fr);
    for (std::size_t k = 0; k < fr.size(); ++k) {
        const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(fr[k] * n));
        // the top-m set maximizes sum p; ties go to earlier rows, i.e. the
        // smallest index sum among maximizers
        double best_sum = -1;
        long best_idx = 0;
        std::uint32_t best = 0;
        for (std::uint32_t s = 0; s < (1u << n); ++s) {
            if (static_cast<std::size_t>(__builtin_popcount(s)) != m) continue;
            double ps = 0;
            long is = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (s >> i & 1u) {
                    ps += p[i];
                    is += static_cast<long>(i);
                }
            if (ps > best_sum || (ps == best_sum && is < best_idx)) {
                best_sum = ps;
                best_idx = is;
                best = s;
            }
        }
        std::size_t tp = 0;
        for (std::size_t i = 0; i < n; ++i) tp += (best >> i & 1u) && actual[i];
        EXPECT_EQ(rows[k].flagged, m);
        EXPECT_EQ(rows[k].true_positives, tp) << "frac " << fr[k];
    }
}

TEST(LongWait, InputErrors) {
    const std::vector<double> fr{0.1};
    EXPECT_THROW(bgnd::long_wait_analysis(std::vector<double>{}, {}, fr), bgnd::InputError);
    EXPECT_THROW(bgnd::long_wait_analysis(std::vector<double>{1.5}, {true}, fr), bgnd::InputError);
}

TEST(PopulationNll, ValuesAndIndefiniteHessian) {
    EXPECT_EQ(bgnd::population_nll_normal(0, 1), 0.5);
    EXPECT_EQ(bgnd::population_nll_normal(2, 1), 2.5);
    const auto H = bgnd::fd_hessian([](double m, double s) { return bgnd::population_nll_normal(m, s); }, 2.0, 1.0);
    const auto ev = bgnd::symmetric_eigenvalues(H);
    EXPECT_NEAR(ev[0], (15 - std::sqrt(233.0)) / 2, 1e-6);
    EXPECT_NEAR(ev[1], (15 + std::sqrt(233.0)) / 2, 1e-6);
    EXPECT_LT(ev[0], 0.0);
    EXPECT_THROW(bgnd::population_nll_normal(0, 0), std::domain_error);
}

TEST(Evaluate, ReportFiles) {
    bgnd::Rng rng(4);
    std::vector<double> y;
    std::vector<std::vector<bgnd::Forecast>> f(2);
    for (int i = 0; i < 200; ++i) {
        const double mu = rng.uniform() * 2;
        y.push_back(std::exp(mu + 0.5 * rng.normal()));
        f[0].push_back(bgnd::Forecast::gnd(bgnd::PowerTransform::log(), {mu, 0.5, 2.0}));
        f[1].push_back(bgnd::Forecast::exponential(0.25));
    }
    const std::vector<double> alphas{0.6, 0.7}, fr{0.1, 0.2};
    const auto r = bgnd::evaluate({"good", "exp"}, f, y, alphas, fr, 5.0, 1);
    EXPECT_EQ(r.benchmark, "exp");
    EXPECT_GT(r.models[0].crps_reduction_pct, 0.0);
    EXPECT_EQ(r.models[1].crps_reduction_pct, 0.0);
    for (const auto& m : r.models)
        for (double l : m.pinball) EXPECT_GE(l, 0.0);
    const auto dir = (std::filesystem::temp_directory_path() / "bgnd_eval_report").string();
    std::filesystem::remove_all(dir);
    const auto files = bgnd::write_report(r, dir);
    EXPECT_EQ(files.size(), 4u);
    const auto lng = bgnd::read_csv(dir + "/report_long.csv");
    EXPECT_EQ(lng.header, (std::vector<std::string>{"model", "metric", "value"}));
    EXPECT_EQ(lng.rows.size(), 2u * (2 + 2 + 2 * 2));
    EXPECT_EQ(lng.rows[2][1], "pinball@0.6");
    const auto pin = bgnd::read_csv(dir + "/pinball.csv");
    EXPECT_EQ(pin.rows[1][0], "0.7");
    EXPECT_EQ(pin.rows[1][2], "2.3");
    std::filesystem::remove_all(dir);
}
