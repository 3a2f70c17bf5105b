#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bgnd/dataset.hpp"
#include "bgnd/error.hpp"
#include "bgnd/rng.hpp"
#include "bgnd/trees.hpp"

namespace bgnd {

struct Stage {
    double step = 0.0;
    Tree tree;
};

/// Additive tree model: base + sum_m step_m * tree_m(x).
struct Ensemble {
    double base = 0.0;
    std::size_t n_features = 0;
    std::vector<Stage> stages;

    double predict(std::span<const double> x) const {
        if (x.size() != n_features)
            throw InputError("ensemble expects " + std::to_string(n_features) + " features, got " +
                             std::to_string(x.size()));
        double s = base;
        for (const auto& st : stages) s += st.step * st.tree.predict(x);
        return s;
    }

    double predict_binned(std::span<const std::uint16_t> x) const {
        double s = base;
        for (const auto& st : stages) s += st.step * st.tree.predict_binned(x);
        return s;
    }

    std::vector<double> predict_all(const Dataset& d) const {
        std::vector<double> out(d.rows);
        for (std::size_t i = 0; i < d.rows; ++i) out[i] = predict(d.row(i));
        return out;
    }
};

/// Per-fit diagnostics. train_loss[m] is the training loss of the m-stage
/// model (entry 0 is the initial model); the remaining per-stage vectors have
/// one entry per kept stage. loss_change holds each stage's exact loss
/// decrement, which stays meaningful after train_loss stops resolving it.
struct FitReport {
    std::vector<double> train_loss;
    std::vector<double> loss_change;
    std::vector<double> correlations;
    std::vector<std::size_t> depths;
    std::vector<double> steps;
    double step_budget = 0.0;
    double final_grad_norm = 0.0;
    std::string stop_reason;
    std::size_t chosen_depth = 0;
    std::size_t chosen_iters = 0;
    std::size_t cv_folds = 0;
    std::vector<double> cv_curve;
    double nu = 0.0;
    double psi = 0.0;
};

// ---------------------------------------------------------------------------
// K-fold selection of (depth, iterations)
// ---------------------------------------------------------------------------

/// Fold id per row: a seeded permutation dealt round-robin into k folds.
inline std::vector<std::size_t> kfold_assignment(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<std::size_t> fold(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold[perm[pos]] = pos % k;
    return fold;
}

struct CvChoice {
    std::size_t depth = 0;
    std::size_t iters = 0;
    std::vector<double> curve;
};

/// fold_curve(depth, train_rows, val_rows) returns the mean held-out loss of
/// the m-stage model at index m. Curves of different length are extended with
/// their last value (a stopped fit no longer changes). Folds are weighted by
/// size; ties go to the smaller depth, then fewer iterations.
template <class FoldCurve>
CvChoice select_by_cv(std::size_t n, std::size_t k, std::uint64_t seed,
                      const std::vector<std::size_t>& depth_grid, FoldCurve&& fold_curve) {
    if (k < 2) throw std::invalid_argument("select_by_cv: need at least 2 folds");
    if (n < k) throw InputError("cross-validation: fewer rows than folds");
    if (depth_grid.empty()) throw std::invalid_argument("select_by_cv: empty depth grid");
    const auto fold = kfold_assignment(n, k, seed);
    CvChoice best;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t depth : depth_grid) {
        std::vector<double> total;
        for (std::size_t f = 0; f < k; ++f) {
            std::vector<std::size_t> train, val;
            for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? val : train).push_back(i);
            const std::vector<double> curve = fold_curve(depth, train, val);
            const double w = static_cast<double>(val.size()) / static_cast<double>(n);
            if (curve.size() > total.size()) {
                const double last = total.empty() ? 0.0 : total.back();
                // earlier folds' contributions extend with their final value
                total.resize(curve.size(), last);
            }
            for (std::size_t m = 0; m < total.size(); ++m)
                total[m] += w * curve[std::min(m, curve.size() - 1)];
        }
        for (std::size_t m = 0; m < total.size(); ++m)
            if (total[m] < best_loss) {
                best_loss = total[m];
                best.depth = depth;
                best.iters = m;
                best.curve = total;
            }
    }
    return best;
}

}  // namespace bgnd
