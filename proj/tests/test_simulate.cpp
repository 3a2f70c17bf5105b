#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "bgnd/schema.hpp"
#include "bgnd/sim_config.hpp"

namespace {

bgnd::SimConfig cells(std::size_t n, std::vector<double> mu, std::vector<double> b, std::vector<std::vector<double>> cuts) {
    bgnd::SimConfig c;
    c.n = n;
    c.seed = 11;
    c.piecewise.cuts = std::move(cuts);
    c.piecewise.mu = std::move(mu);
    c.piecewise.b = std::move(b);
    return c;
}

std::string tmp(const std::string& f) { return (std::filesystem::temp_directory_path() / ("bgnd_sim_" + f)).string(); }

}  // namespace

TEST(Simulate, SingleCellMomentsOfStandardNormal) {
    auto c = cells(100000, {0.0}, {1.0}, {{}});
    const auto r = bgnd::simulate(c);
    double m = 0, v = 0;
    for (double y : r.data.response) m += y;
    m /= r.data.rows;
    for (double y : r.data.response) v += (y - m) * (y - m);
    EXPECT_NEAR(m, 0.0, 0.02);
    EXPECT_NEAR(std::sqrt(v / r.data.rows), 1.0, 0.02);
    EXPECT_EQ(r.truth.size(), 1u);
    EXPECT_EQ(r.truth[0].count, 100000u);
}

TEST(Simulate, TwoCellRmsResidualsMatchScale) {
    const auto r = bgnd::simulate(cells(100000, {0.0, 5.0}, {1.0, 3.0}, {{0.5}}));
    std::vector<double> ss(2, 0.0);
    for (std::size_t i = 0; i < r.data.rows; ++i) {
        const auto k = r.cell_of_row[i];
        EXPECT_EQ(k, r.data.at(i, 0) < 0.5 ? 0u : 1u);
        ss[k] += std::pow(r.data.response[i] - r.truth[k].mu, 2);
    }
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(std::sqrt(ss[k] / r.truth[k].count) / r.truth[k].b, 1.0, 0.02);
}

TEST(Simulate, RowMajorCellsAndPrecision) {
    auto c = cells(2000, {1, 2, 3, 4, 5, 6}, {1, 1, 1, 1, 1, 1}, {{0.5}, {0.3, 0.6}});
    c.precision = 2;
    const auto r = bgnd::simulate(c);
    EXPECT_EQ(r.truth[4].lo, (std::vector<double>{0.5, 0.3}));
    EXPECT_EQ(r.truth[4].hi, (std::vector<double>{1.0, 0.6}));
    for (std::size_t i = 0; i < r.data.rows; ++i) {
        const double x0 = r.data.at(i, 0), x1 = r.data.at(i, 1);
        EXPECT_EQ(std::round(x0 * 100) / 100, x0);
        const std::size_t k = (x0 >= 0.5) * 3 + (x1 >= 0.3) + (x1 >= 0.6);
        EXPECT_EQ(r.cell_of_row[i], k);
    }
}

TEST(Simulate, PositiveResponsesUnderFourthRoot) {
    auto c = cells(5000, {0.5}, {0.5}, {{}});
    c.power = 0.25;
    c.gamma = 1.0;
    const auto r = bgnd::simulate(c);
    EXPECT_GT(r.redraws, 0u);
    for (double y : r.data.response) EXPECT_GT(y, 0.0);
}

TEST(Simulate, SameSeedSameFiles) {
    const auto cfg = bgnd::parse_sim_config_text(R"(
kind = "piecewise-cells"
n = 500
seed = 3
gamma = 1.5
power = 0
[piecewise]
cuts = [[0.5], [0.5]]
mu = [1.0, 1.5, 2.0, 2.5]
b = [0.3, 0.4, 0.5, 0.6]
noise_features = 1
timestamp = true
)");
    for (const char* f : {"a", "b"}) {
        const auto r = bgnd::simulate(cfg);
        bgnd::write_sim_data(r, cfg, tmp(std::string(f) + ".csv"));
        bgnd::write_sim_truth(r, cfg, tmp(std::string(f) + "_truth.csv"));
    }
    EXPECT_EQ(bgnd::read_file(tmp("a.csv")), bgnd::read_file(tmp("b.csv")));
    EXPECT_EQ(bgnd::read_file(tmp("a_truth.csv")), bgnd::read_file(tmp("b_truth.csv")));
    const auto t = bgnd::read_csv(tmp("a.csv"));
    EXPECT_EQ(t.header, (std::vector<std::string>{"x0", "x1", "x2", "arrived", "y"}));
    const auto loaded = bgnd::load_csv(tmp("a.csv"), {"y", {}, {}});
    EXPECT_EQ(loaded.data.rows, 500u);
    EXPECT_EQ(loaded.data.cols(), 7u);
    const auto truth = bgnd::read_csv(tmp("a_truth.csv"));
    EXPECT_EQ(truth.rows.size(), 4u);
    EXPECT_EQ(truth.header.front(), "cell");
}

TEST(Simulate, SinusoidalTimeTruthAndTimestamps) {
    const auto cfg = bgnd::parse_sim_config_text(R"(
kind = "sinusoidal-time"
n = 3000
seed = 1
[sinusoidal]
weeks = 2
mu0 = 3.0
b0 = 0.4
)");
    const auto r = bgnd::simulate(cfg);
    ASSERT_EQ(r.truth.size(), 168u);
    EXPECT_NEAR(r.truth[6].mu, 3.0 + 0.5 * std::sin(2 * M_PI * 6.5 / 24) + 0.2 * std::sin(2 * M_PI * 6.5 / 168), 1e-15);
    for (std::size_t i = 0; i < r.data.rows; ++i) {
        const auto ts = bgnd::parse_timestamp(r.timestamps[i]);
        ASSERT_TRUE(ts);
        EXPECT_EQ(ts->week_hours(), r.data.week_hours[i]);
        EXPECT_EQ(r.cell_of_row[i], static_cast<std::size_t>(r.data.week_hours[i]));
    }
    EXPECT_EQ(r.timestamps.front().substr(0, 4), "2024");
}

TEST(SimConfig, Errors) {
    EXPECT_THROW(bgnd::parse_sim_config_text("kind = \"spiral\""), bgnd::InputError);
    EXPECT_THROW(bgnd::parse_sim_config_text("n = [1"), bgnd::InputError);
    EXPECT_THROW(bgnd::parse_sim_config_text("[piecewise]\ncuts = [[0.5]]\nmu = [1.0]\nb = [1.0, 1.0]"),
                 bgnd::InputError);
    EXPECT_THROW(bgnd::parse_sim_config_text("[piecewise]\ncuts = [[0.5]]\nmu = [1.0, 2.0]\nb = [1.0, 0.0]"),
                 bgnd::InputError);
    EXPECT_THROW(bgnd::parse_sim_config_text("[piecewise]\ncuts = [[1.5]]\nmu = [1.0, 2.0]\nb = [1.0, 1.0]"),
                 bgnd::InputError);
    EXPECT_THROW(bgnd::parse_sim_config_text("n = \"many\"\n[piecewise]\ncuts = [[]]\nmu = [1.0]\nb = [1.0]"),
                 bgnd::InputError);
}
