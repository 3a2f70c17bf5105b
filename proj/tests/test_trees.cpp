#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bgnd/rng.hpp"
#include "bgnd/trees.hpp"

namespace {

bgnd::Dataset make_dataset(std::size_t rows, std::size_t cols, const std::vector<double>& values) {
    bgnd::Dataset d;
    for (std::size_t j = 0; j < cols; ++j) d.feature_names.push_back("x" + std::to_string(j));
    d.rows = rows;
    d.features = values;
    return d;
}

bgnd::Dataset random_dataset(std::size_t rows, std::size_t cols, std::uint64_t seed, int levels = 12) {
    bgnd::Rng rng(seed);
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = static_cast<double>(rng.below(static_cast<std::uint64_t>(levels)));
    return make_dataset(rows, cols, v);
}

double sse(const bgnd::Tree& t, const bgnd::BinnedMatrix& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double r = y[i] - t.predict_binned(x.row(i));
        s += r * r;
    }
    return s;
}

// Lowest SSE over every single split (or none), by direct enumeration.
double best_depth1_sse(const bgnd::BinnedMatrix& x, const std::vector<double>& y, const bgnd::SplitGrid& g) {
    auto group_sse = [&](auto pred) {
        double s = 0.0, n = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i)
            if (pred(i)) { s += y[i]; n += 1.0; }
        if (n == 0.0) return 0.0;
        const double m = s / n;
        double e = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i)
            if (pred(i)) e += (y[i] - m) * (y[i] - m);
        return e;
    };
    double best = group_sse([](std::size_t) { return true; });
    for (std::size_t f = 0; f < x.cols; ++f)
        for (std::size_t t = 0; t + 1 < g.n_bins(f); ++t) {
            const double e = group_sse([&](std::size_t i) { return x.at(i, f) <= t; }) +
                             group_sse([&](std::size_t i) { return x.at(i, f) > t; });
            best = std::min(best, e);
        }
    return best;
}

// Leaf boxes [lo, hi) per feature, collected by walking every root-to-leaf path.
struct Box {
    std::vector<double> lo, hi;
    double value;
};

void collect_boxes(const bgnd::Tree& t, int node, Box box, std::vector<Box>& out) {
    const auto& n = t.nodes()[node];
    if (n.is_leaf()) {
        box.value = n.value;
        out.push_back(box);
        return;
    }
    Box l = box, r = box;
    l.hi[n.feature] = std::min(l.hi[n.feature], n.threshold);
    r.lo[n.feature] = std::max(r.lo[n.feature], n.threshold);
    collect_boxes(t, n.left, l, out);
    collect_boxes(t, n.right, r, out);
}

}  // namespace

TEST(BuildGrid, MidpointGrid) {
    const auto d = make_dataset(3, 1, {1.0, 2.0, 3.0});
    const auto g = bgnd::build_grid(d, 256);
    EXPECT_EQ(g.thresholds[0], (std::vector<double>{1.5, 2.5}));
}

TEST(BuildGrid, ConstantFeatureHasNoThresholds) {
    const auto d = make_dataset(3, 2, {5, 1, 5, 2, 5, 3});
    const auto g = bgnd::build_grid(d, 256);
    EXPECT_TRUE(g.thresholds[0].empty());
    EXPECT_EQ(g.thresholds[1].size(), 2u);
    EXPECT_THROW(bgnd::build_grid(d, 1), std::invalid_argument);
}

TEST(BuildGrid, QuantileSpacingWhenTooManyValues) {
    bgnd::Rng rng(3);
    std::vector<double> v(10000);
    for (auto& x : v) x = rng.uniform();
    const auto g = bgnd::build_grid(make_dataset(v.size(), 1, v), 64);
    const auto& t = g.thresholds[0];
    ASSERT_EQ(t.size(), 63u);
    std::vector<double> d = v;
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    const std::size_t n = d.size();
    for (std::size_t i = 1; i <= 63; ++i) {
        // Exact (i/64)-quantile of the distinct values is d[k-1], k = ceil(i n / 64).
        const std::size_t k = (i * n + 63) / 64;
        EXPECT_GE(t[i - 1], d[k - 2]);
        EXPECT_LE(t[i - 1], d[k]);
        if (i > 1) {
            EXPECT_GT(t[i - 1], t[i - 2]);
        }
    }
}

TEST(BinFeatures, Examples) {
    bgnd::SplitGrid g{{{1.5, 2.5}}};
    EXPECT_EQ(g.bin(0, 2.0), 1);
    EXPECT_EQ(g.bin(0, -1e9), 0);
    EXPECT_EQ(g.bin(0, 1e9), 2);
    EXPECT_EQ(g.bin(0, 1.5), 1);
    auto d = make_dataset(2, 1, {2.0, NAN});
    EXPECT_THROW(bgnd::bin_features(d, g), bgnd::InputError);
}

TEST(BinFeatures, MatchesBruteForceCountAndPreservesOrder) {
    bgnd::Rng rng(8);
    std::vector<double> train(500);
    for (auto& x : train) x = std::round(100.0 * rng.normal()) / 10.0;
    const auto g = bgnd::build_grid(make_dataset(train.size(), 1, train), 32);
    for (int i = 0; i < 2000; ++i) {
        const double a = 4.0 * rng.normal();
        const double b = 4.0 * rng.normal();
        std::size_t brute = 0;
        for (double t : g.thresholds[0]) brute += (t <= a) ? 1 : 0;
        EXPECT_EQ(g.bin(0, a), brute);
        if (a < b) {
            EXPECT_LE(g.bin(0, a), g.bin(0, b));
        }
    }
    // Every training value lands in a valid bin.
    const auto x = bgnd::bin_features(make_dataset(train.size(), 1, train), g);
    for (auto b : x.bins) EXPECT_LT(b, g.n_bins(0));
}

TEST(FitTree, ConstantTargetsGiveSingleLeaf) {
    const auto d = random_dataset(100, 3, 1);
    const auto g = bgnd::build_grid(d);
    const auto x = bgnd::bin_features(d, g);
    const std::vector<double> y(100, 3.7);
    for (std::size_t depth : {1u, 3u, 6u}) {
        const auto t = bgnd::fit_tree_ls(x, y, depth, g);
        EXPECT_EQ(t.n_leaves(), 1u);
        EXPECT_NEAR(t.nodes()[0].value, 3.7, 1e-14);
    }
}

TEST(FitTree, BinaryFeatureSeparates) {
    const auto d = make_dataset(4, 1, {0, 0, 1, 1});
    const auto g = bgnd::build_grid(d);
    const auto x = bgnd::bin_features(d, g);
    const auto t = bgnd::fit_tree_ls(x, std::vector<double>{0, 0, 1, 1}, 1, g);
    ASSERT_EQ(t.n_leaves(), 2u);
    EXPECT_EQ(t.predict(std::vector<double>{0.0}), 0.0);
    EXPECT_EQ(t.predict(std::vector<double>{1.0}), 1.0);
    EXPECT_THROW(bgnd::fit_tree_ls(x, std::vector<double>{0, 0, 1, 1}, 0, g), std::invalid_argument);
}

TEST(FitTree, EmptyInputRejected) {
    bgnd::BinnedMatrix x{0, 1, {}};
    bgnd::SplitGrid g{{{}}};
    EXPECT_THROW(bgnd::fit_tree_ls(x, std::vector<double>{}, 1, g), bgnd::InputError);
}

TEST(FitTree, Depth2BeatsEveryDepth1Split) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto d = random_dataset(200, 3, seed, 6);
        const auto g = bgnd::build_grid(d);
        const auto x = bgnd::bin_features(d, g);
        bgnd::Rng rng(seed + 100);
        std::vector<double> y(200);
        for (auto& v : y) v = rng.normal();
        const auto t1 = bgnd::fit_tree_ls(x, y, 1, g);
        const auto t2 = bgnd::fit_tree_ls(x, y, 2, g);
        const double oracle = best_depth1_sse(x, y, g);
        EXPECT_NEAR(sse(t1, x, y), oracle, 1e-9);
        EXPECT_LE(sse(t2, x, y), oracle + 1e-9);
    }
}

TEST(FitTree, SseNonIncreasingInDepth) {
    const auto d = random_dataset(300, 4, 21);
    const auto g = bgnd::build_grid(d);
    const auto x = bgnd::bin_features(d, g);
    bgnd::Rng rng(5);
    std::vector<double> y(300);
    for (auto& v : y) v = rng.normal() + d.at(&v - y.data(), 0);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t depth = 1; depth <= 8; ++depth) {
        const double e = sse(bgnd::fit_tree_ls(x, y, depth, g), x, y);
        EXPECT_LE(e, prev + 1e-9);
        prev = e;
    }
}

TEST(FitTree, TrainingPredictionsAreLeafMeans) {
    const auto d = random_dataset(150, 2, 4);
    const auto g = bgnd::build_grid(d);
    const auto x = bgnd::bin_features(d, g);
    bgnd::Rng rng(6);
    std::vector<double> y(150);
    for (auto& v : y) v = rng.uniform();
    const auto t = bgnd::fit_tree_ls(x, y, 3, g);
    std::vector<double> sum(t.nodes().size(), 0.0), cnt(t.nodes().size(), 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto leaf = t.leaf_of_binned(x.row(i));
        sum[leaf] += y[i];
        cnt[leaf] += 1.0;
        EXPECT_EQ(t.leaf_of(d.row(i)), leaf);
    }
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto leaf = t.leaf_of_binned(x.row(i));
        EXPECT_NEAR(t.predict_binned(x.row(i)), sum[leaf] / cnt[leaf], 1e-14);
    }
}

TEST(TreePredict, AgreesWithExplicitBoxWalk) {
    const auto d = random_dataset(400, 3, 9);
    const auto g = bgnd::build_grid(d);
    const auto x = bgnd::bin_features(d, g);
    std::vector<double> y(400);
    for (std::size_t i = 0; i < 400; ++i) y[i] = std::sin(d.at(i, 0)) * d.at(i, 1) - d.at(i, 2);
    const auto t = bgnd::fit_tree_ls(x, y, 4, g);
    std::vector<Box> boxes;
    const double inf = std::numeric_limits<double>::infinity();
    collect_boxes(t, 0, Box{std::vector<double>(3, -inf), std::vector<double>(3, inf), 0.0}, boxes);
    bgnd::Rng rng(10);
    for (int k = 0; k < 1000; ++k) {
        std::vector<double> p{13.0 * rng.uniform() - 0.5, 13.0 * rng.uniform() - 0.5, 13.0 * rng.uniform() - 0.5};
        int hits = 0;
        double v = 0.0;
        for (const auto& b : boxes) {
            bool in = true;
            for (int j = 0; j < 3; ++j) in = in && p[j] >= b.lo[j] && p[j] < b.hi[j];
            if (in) { ++hits; v = b.value; }
        }
        ASSERT_EQ(hits, 1);
        EXPECT_EQ(t.predict(p), v);
    }
}

TEST(TreePredict, ConstantOnFundamentalCellsAndDeterministic) {
    const auto d = random_dataset(500, 2, 12, 5);
    const auto g = bgnd::build_grid(d);
    const auto x = bgnd::bin_features(d, g);
    bgnd::Rng rng(13);
    std::vector<double> y(500);
    for (auto& v : y) v = rng.normal();
    const auto t = bgnd::fit_tree_ls(x, y, 5, g);
    const auto cells = bgnd::build_cells(x);
    std::vector<double> seen(cells.n_cells(), NAN);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double p = t.predict(d.row(i));
        auto& s = seen[cells.cell_of_row[i]];
        if (std::isnan(s)) s = p;
        EXPECT_EQ(s, p);
    }
    const auto t2 = bgnd::fit_tree_ls(x, y, 5, g);
    ASSERT_EQ(t.nodes().size(), t2.nodes().size());
    for (std::size_t i = 0; i < t.nodes().size(); ++i) {
        EXPECT_EQ(t.nodes()[i].feature, t2.nodes()[i].feature);
        EXPECT_EQ(t.nodes()[i].bin, t2.nodes()[i].bin);
        EXPECT_EQ(t.nodes()[i].value, t2.nodes()[i].value);
    }
}

TEST(TreePredict, SingleLeaf) {
    EXPECT_EQ(bgnd::Tree::constant(2.5).predict(std::vector<double>{1.0, 2.0}), 2.5);
}
