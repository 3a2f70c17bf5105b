#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bgnd/dataset.hpp"
#include "bgnd/ensemble.hpp"
#include "bgnd/error.hpp"
#include "bgnd/trees.hpp"

namespace bgnd {

struct LocationConfig {
    std::size_t depth = 2;
    double shrinkage = 0.1;
    std::size_t max_iters = 1000;
    std::size_t cv_folds = 10;  // < 2 disables CV and uses depth / max_iters as given
    std::vector<std::size_t> depth_grid{1, 2, 3, 4};
    std::size_t patience = 20;
    std::uint64_t seed = 0;
};

struct LocationFit {
    Ensemble ensemble;
    FitReport report;
};

namespace detail {

struct L2Run {
    Ensemble ensemble;
    std::vector<double> train_sse;
    std::vector<double> val_mse;  // [m] = held-out mean squared error after m stages
    std::string stop_reason;
};

inline double sum_sq(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

/// Stops at max_iters, when no split survives, or (with a validation set)
/// after `patience` stages without held-out improvement.
inline L2Run run_l2(const BinnedMatrix& x, std::span<const double> y, const SplitGrid& grid,
                    std::size_t depth, double shrinkage, std::size_t max_iters,
                    const BinnedMatrix* xv = nullptr, std::span<const double> yv = {},
                    std::size_t patience = 0) {
    L2Run run;
    run.ensemble.n_features = x.cols;
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    run.ensemble.base = mean;

    std::vector<double> resid(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) resid[i] = y[i] - mean;
    run.train_sse.push_back(sum_sq(resid));

    std::vector<double> vresid;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_m = 0;
    if (xv) {
        vresid.resize(yv.size());
        for (std::size_t i = 0; i < yv.size(); ++i) vresid[i] = yv[i] - mean;
        best_val = sum_sq(vresid) / static_cast<double>(yv.size());
        run.val_mse.push_back(best_val);
    }

    run.stop_reason = "max_iters";
    for (std::size_t m = 0; m < max_iters; ++m) {
        Tree tree = fit_tree_ls(x, resid, depth, grid);
        if (tree.n_leaves() == 1) {
            run.stop_reason = "no_split";
            break;
        }
        for (std::size_t i = 0; i < x.rows; ++i) resid[i] -= shrinkage * tree.predict_binned(x.row(i));
        run.train_sse.push_back(sum_sq(resid));
        if (xv) {
            for (std::size_t i = 0; i < xv->rows; ++i) vresid[i] -= shrinkage * tree.predict_binned(xv->row(i));
            const double v = sum_sq(vresid) / static_cast<double>(yv.size());
            run.val_mse.push_back(v);
            if (v < best_val) {
                best_val = v;
                best_m = m + 1;
            }
        }
        run.ensemble.stages.push_back({shrinkage, std::move(tree)});
        if (xv && run.ensemble.stages.size() - best_m >= patience) {
            run.stop_reason = "early_stopping";
            break;
        }
    }
    return run;
}

inline std::vector<double> gather(std::span<const double> v, std::span<const std::size_t> idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

}  // namespace detail

/// L2 boosting of regression trees on already-binned features.
inline LocationFit fit_location(const BinnedMatrix& x, std::span<const double> y, const SplitGrid& grid,
                                const LocationConfig& cfg) {
    if (x.rows < 10) throw InputError("fit_location: need at least 10 rows, got " + std::to_string(x.rows));
    if (y.size() != x.rows) throw InputError("fit_location: response length mismatch");
    if (cfg.depth < 1) throw std::invalid_argument("fit_location: depth must be >= 1");
    if (!(cfg.shrinkage > 0.0 && cfg.shrinkage <= 1.0))
        throw std::invalid_argument("fit_location: shrinkage must be in (0, 1]");
    for (double v : y)
        if (!std::isfinite(v)) throw InputError("fit_location: non-finite response");

    LocationFit fit;
    std::size_t depth = cfg.depth;
    std::size_t iters = cfg.max_iters;
    if (cfg.cv_folds >= 2) {
        const CvChoice choice = select_by_cv(
            x.rows, cfg.cv_folds, cfg.seed, cfg.depth_grid,
            [&](std::size_t d, const std::vector<std::size_t>& tr, const std::vector<std::size_t>& va) {
                const BinnedMatrix xt = x.subset(tr), xv = x.subset(va);
                const auto yt = detail::gather(y, tr), yv = detail::gather(y, va);
                return detail::run_l2(xt, yt, grid, d, cfg.shrinkage, cfg.max_iters, &xv, yv, cfg.patience)
                    .val_mse;
            });
        depth = choice.depth;
        iters = choice.iters;
        fit.report.cv_folds = cfg.cv_folds;
        fit.report.cv_curve = choice.curve;
    }

    detail::L2Run run = detail::run_l2(x, y, grid, depth, cfg.shrinkage, iters);
    fit.ensemble = std::move(run.ensemble);
    fit.report.train_loss = std::move(run.train_sse);
    fit.report.stop_reason = run.stop_reason;
    // the refit ran exactly the CV-chosen number of rounds
    if (cfg.cv_folds >= 2 && run.stop_reason == "max_iters" && iters < cfg.max_iters) fit.report.stop_reason = "cv_selected";
    fit.report.chosen_depth = depth;
    fit.report.chosen_iters = fit.ensemble.stages.size();
    for (std::size_t m = 0; m < fit.ensemble.stages.size(); ++m) {
        fit.report.depths.push_back(fit.ensemble.stages[m].tree.depth());
        fit.report.steps.push_back(cfg.shrinkage);
    }
    return fit;
}

inline LocationFit fit_location(const Dataset& data, const SplitGrid& grid, const LocationConfig& cfg) {
    data.check_shape();
    if (!data.has_response()) throw InputError("fit_location: dataset has no response");
    return fit_location(bin_features(data, grid), data.response, grid, cfg);
}

inline double predict_location(const Ensemble& e, std::span<const double> x) { return e.predict(x); }

}  // namespace bgnd
