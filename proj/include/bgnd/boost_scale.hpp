#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bgnd/dataset.hpp"
#include "bgnd/ensemble.hpp"
#include "bgnd/error.hpp"
#include "bgnd/trees.hpp"

namespace bgnd {

/// Principal branch of the Lambert W function for y >= 0 (Halley iteration).
inline double lambert_w(double y) {
    if (!(y >= 0.0)) throw std::domain_error("lambert_w: argument must be >= 0");
    if (y == 0.0) return 0.0;
    if (std::isinf(y)) return y;
    double w = y < 3.0 ? std::log1p(y) * 0.75 : std::log(y) - std::log(std::log(y));
    for (int it = 0; it < 100; ++it) {
        const double ew = std::exp(w);
        const double f = w * ew - y;
        const double wp1 = w + 1.0;
        const double dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= dw;
        if (std::abs(dw) <= 1e-16 * (1.0 + std::abs(w))) break;
    }
    return w;
}

inline double auto_psi(std::size_t n2) { return lambert_w(std::pow(static_cast<double>(n2), 0.2)); }

inline double auto_nu(std::size_t n2, double gamma) {
    const double l = std::log(static_cast<double>(n2));
    if (!(l > 1.0)) return 0.9;
    return std::min(0.9, std::pow(l, -(gamma + 1.0) / 2.0));
}

namespace detail {
inline void check_risk_args(std::span<const double> beta, std::span<const double> res_pow) {
    if (beta.size() != res_pow.size()) throw std::invalid_argument("scale risk: length mismatch");
    if (beta.empty()) throw std::invalid_argument("scale risk: empty input");
}
}  // namespace detail

/// Mean of res_pow * e^beta - beta: the scaled negative log-likelihood of the
/// log-scale given fixed residual powers.
inline double empirical_risk(std::span<const double> beta, std::span<const double> res_pow) {
    detail::check_risk_args(beta, res_pow);
    double s = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) s += res_pow[i] * std::exp(beta[i]) - beta[i];
    return s / static_cast<double>(beta.size());
}

/// Pointwise gradient res_pow * e^beta - 1 (n times the partial derivative of
/// empirical_risk).
inline std::vector<double> risk_gradient(std::span<const double> beta, std::span<const double> res_pow) {
    detail::check_risk_args(beta, res_pow);
    std::vector<double> g(beta.size());
    for (std::size_t i = 0; i < beta.size(); ++i) g[i] = res_pow[i] * std::exp(beta[i]) - 1.0;
    return g;
}

inline double rms(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

struct EpsGradient {
    Tree tree;                 // leaf values scaled to unit empirical norm
    double correlation = 0.0;  // <-grad/|grad|, tree> in the empirical inner product
    std::size_t depth = 0;
    bool zero = false;         // gradient or fitted tree vanished: nothing to descend along
};

/// Least-squares tree on -grad, deepened one level at a time until its
/// correlation with -grad reaches epsilon or the tree stops growing.
/// max_depth = 0 means the depth that isolates every fundamental cell.
inline EpsGradient eps_gradient(const BinnedMatrix& x, std::span<const double> grad, std::size_t depth,
                                double epsilon, const SplitGrid& grid, std::size_t max_depth = 0) {
    if (grad.size() != x.rows) throw InputError("eps_gradient: gradient length mismatch");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("eps_gradient: epsilon must be in (0, 1]");
    const std::size_t cap = std::max(depth, max_depth == 0 ? grid.full_depth() : max_depth);

    EpsGradient out;
    const double gnorm = rms(grad);
    if (!(gnorm > 0.0)) {
        out.zero = true;
        return out;
    }
    std::vector<double> target(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) target[i] = -grad[i];

    TreeGrower grower(x, target, grid);
    while (grower.depth() < depth && grower.grow_level()) {
    }
    std::vector<double> fitted(x.rows);
    for (;;) {
        out.tree = grower.tree();
        for (std::size_t i = 0; i < x.rows; ++i) fitted[i] = out.tree.predict_binned(x.row(i));
        const double fnorm = rms(fitted);
        if (!(fnorm > 0.0)) {
            out.zero = true;
            return out;
        }
        double dot = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) dot += target[i] * fitted[i];
        out.correlation = dot / static_cast<double>(x.rows) / (gnorm * fnorm);
        out.depth = grower.depth();
        if (out.correlation >= epsilon || grower.depth() >= cap || !grower.grow_level()) {
            out.tree.scale_values(1.0 / fnorm);
            return out;
        }
    }
}

/// Exact minimizer over (0, 1] of phi(rho) = risk(beta + rho * step_cap * direction)
/// for a descent direction, by bisection on phi'. Rows are grouped by
/// direction value so each phi' evaluation costs one exp per distinct value.
inline double line_search(std::span<const double> beta, std::span<const double> res_pow,
                          std::span<const double> direction, double step_cap, double tol = 1e-8) {
    detail::check_risk_args(beta, res_pow);
    if (direction.size() != beta.size()) throw std::invalid_argument("line_search: direction length mismatch");
    if (!(step_cap > 0.0)) throw std::invalid_argument("line_search: step_cap must be > 0");

    struct Group {
        double a = 0.0;  // sum of res_pow * e^beta
        double n = 0.0;
    };
    std::map<double, Group> groups;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        auto& g = groups[direction[i]];
        g.a += res_pow[i] * std::exp(beta[i]);
        g.n += 1.0;
    }
    // phi'(rho) up to the positive factor step_cap / n
    const auto dphi = [&](double rho) {
        double s = 0.0;
        for (const auto& [d, g] : groups) s += d * (g.a * std::exp(rho * step_cap * d) - g.n);
        return s;
    };
    if (!(dphi(0.0) < 0.0)) throw ContractError("line_search: direction is not a descent direction");
    if (dphi(1.0) <= 0.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 2000 && hi - lo > tol * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (dphi(mid) < 0.0 ? lo : hi) = mid;
    }
    return hi;
}

struct ScaleConfig {
    double gamma = 2.0;
    double epsilon = 0.5;
    std::optional<double> nu;   // default auto_nu(n2, gamma)
    std::optional<double> psi;  // default auto_psi(n2)
    std::size_t max_iters = 1000;
    std::size_t depth = 2;
    std::size_t max_depth = 0;  // escalation ceiling; 0 = full grid depth
    double grad_tol = 1e-10;
    double line_search_tol = 1e-8;
    double res_pow_floor = 1e-12;
    std::size_t cv_folds = 10;
    std::vector<std::size_t> depth_grid{1, 2, 3, 4};
    std::size_t patience = 20;
    std::uint64_t seed = 0;
};

struct ScaleFit {
    Ensemble ensemble;
    FitReport report;
};

/// |y - mu_hat(x)|^gamma per row, clamped below at floor.
inline std::vector<double> residual_powers(const Dataset& data, const Ensemble& mu_hat, double gamma,
                                           double floor = 1e-12) {
    data.check_shape();
    if (!data.has_response()) throw InputError("residual_powers: dataset has no response");
    if (mu_hat.n_features != data.cols())
        throw InputError("fit_scale: location model expects " + std::to_string(mu_hat.n_features) +
                         " features, data has " + std::to_string(data.cols()));
    std::vector<double> out(data.rows);
    for (std::size_t i = 0; i < data.rows; ++i) {
        const double r = std::pow(std::abs(data.response[i] - mu_hat.predict(data.row(i))), gamma);
        if (!std::isfinite(r))
            throw NumericalError("fit_scale: non-finite residual at row " + std::to_string(i));
        out[i] = std::max(r, floor);
    }
    return out;
}

namespace detail {

struct ScaleRun {
    Ensemble ensemble;
    FitReport report;
    std::vector<double> val_risk;
};

inline double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline ScaleRun run_scale(const BinnedMatrix& x, std::span<const double> res_pow, const SplitGrid& grid,
                          std::size_t depth, double nu, double psi, std::size_t max_iters,
                          const ScaleConfig& cfg, const BinnedMatrix* xv = nullptr,
                          std::span<const double> rv = {}, std::size_t patience = 0) {
    ScaleRun run;
    run.ensemble.n_features = x.cols;
    run.report.nu = nu;
    run.report.psi = psi;
    const CellIndex cells = build_cells(x);

    std::vector<double> beta(x.rows, 0.0), cand(x.rows), step_dir(x.rows);
    double risk = empirical_risk(beta, res_pow);
    run.report.train_loss.push_back(risk);

    std::vector<double> vbeta;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_m = 0;
    if (xv) {
        vbeta.assign(xv->rows, 0.0);
        best_val = empirical_risk(vbeta, rv);
        run.val_risk.push_back(best_val);
    }

    run.report.stop_reason = "max_iters";
    for (std::size_t m = 0; m < max_iters; ++m) {
        const std::vector<double> grad = cells.cell_means(risk_gradient(beta, res_pow));
        run.report.final_grad_norm = rms(grad);
        if (run.report.final_grad_norm <= cfg.grad_tol) {
            run.report.stop_reason = "converged";
            break;
        }
        EpsGradient eg = eps_gradient(x, grad, depth, cfg.epsilon, grid, cfg.max_depth);
        if (eg.zero) {
            run.report.stop_reason = "converged";
            break;
        }
        for (std::size_t i = 0; i < x.rows; ++i) step_dir[i] = eg.tree.predict_binned(x.row(i));
        const double cap = nu / static_cast<double>(m + 1);
        const double rho = line_search(beta, res_pow, step_dir, cap, cfg.line_search_tol);
        const double step = rho * cap;
        for (std::size_t i = 0; i < x.rows; ++i) cand[i] = beta[i] + step * step_dir[i];
        if (sup_norm(cand) >= psi) {
            run.report.stop_reason = "psi_cap";
            break;
        }
        // risk(cand) - risk(beta), summed without forming the two O(1) risks
        double change = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double sd = step * step_dir[i];
            const double a = res_pow[i] * std::exp(beta[i]);
            change += (a - 1.0) * sd + a * (std::expm1(sd) - sd);
        }
        change /= static_cast<double>(x.rows);
        if (!(change < 0.0)) {
            run.report.stop_reason = "stalled";
            break;
        }
        beta.swap(cand);
        risk += change;
        run.report.train_loss.push_back(risk);
        run.report.loss_change.push_back(change);
        run.report.correlations.push_back(eg.correlation);
        run.report.depths.push_back(eg.depth);
        run.report.steps.push_back(step);
        double tree_sup = 0.0;
        for (const auto& nd : eg.tree.nodes())
            if (nd.is_leaf()) tree_sup = std::max(tree_sup, std::abs(nd.value));
        run.report.step_budget += step * tree_sup;

        if (xv) {
            for (std::size_t i = 0; i < xv->rows; ++i) vbeta[i] += step * eg.tree.predict_binned(xv->row(i));
            const double v = empirical_risk(vbeta, rv);
            run.val_risk.push_back(v);
            if (v < best_val) {
                best_val = v;
                best_m = m + 1;
            }
        }
        run.ensemble.stages.push_back({step, std::move(eg.tree)});
        if (xv && run.ensemble.stages.size() - best_m >= patience) {
            run.report.stop_reason = "early_stopping";
            break;
        }
    }
    return run;
}

inline std::vector<double> gather_rows(std::span<const double> v, std::span<const std::size_t> idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

}  // namespace detail

/// Boosts beta(x) = -gamma log b(x) from beta = 0 given residual powers.
inline ScaleFit fit_scale(const BinnedMatrix& x, std::span<const double> res_pow, const SplitGrid& grid,
                          const ScaleConfig& cfg) {
    if (x.rows < 10) throw InputError("fit_scale: need at least 10 rows, got " + std::to_string(x.rows));
    if (res_pow.size() != x.rows) throw InputError("fit_scale: residual length mismatch");
    if (!(cfg.gamma >= 1.0)) throw std::invalid_argument("fit_scale: gamma must be >= 1");
    if (cfg.depth < 1) throw std::invalid_argument("fit_scale: depth must be >= 1");
    std::vector<double> rp(res_pow.begin(), res_pow.end());
    for (std::size_t i = 0; i < rp.size(); ++i) {
        if (!std::isfinite(rp[i]) || rp[i] < 0.0)
            throw NumericalError("fit_scale: invalid residual power at row " + std::to_string(i));
        rp[i] = std::max(rp[i], cfg.res_pow_floor);
    }
    const double nu = cfg.nu.value_or(auto_nu(x.rows, cfg.gamma));
    const double psi = cfg.psi.value_or(auto_psi(x.rows));
    if (!(nu > 0.0 && nu < 1.0)) throw std::invalid_argument("fit_scale: nu must be in (0, 1)");
    if (!(psi > 0.0)) throw std::invalid_argument("fit_scale: psi must be > 0");

    std::size_t depth = cfg.depth;
    std::size_t iters = cfg.max_iters;
    CvChoice choice;
    if (cfg.cv_folds >= 2) {
        choice = select_by_cv(
            x.rows, cfg.cv_folds, cfg.seed, cfg.depth_grid,
            [&](std::size_t d, const std::vector<std::size_t>& tr, const std::vector<std::size_t>& va) {
                const BinnedMatrix xt = x.subset(tr), xv = x.subset(va);
                const auto rt = detail::gather_rows(rp, tr), rv = detail::gather_rows(rp, va);
                return detail::run_scale(xt, rt, grid, d, nu, psi, cfg.max_iters, cfg, &xv, rv, cfg.patience)
                    .val_risk;
            });
        depth = choice.depth;
        iters = choice.iters;
    }

    detail::ScaleRun run = detail::run_scale(x, rp, grid, depth, nu, psi, iters, cfg);
    ScaleFit fit{std::move(run.ensemble), std::move(run.report)};
    fit.report.chosen_depth = depth;
    fit.report.chosen_iters = fit.ensemble.stages.size();
    if (cfg.cv_folds >= 2) {
        if (fit.report.stop_reason == "max_iters" && iters < cfg.max_iters) fit.report.stop_reason = "cv_selected";
        fit.report.cv_folds = cfg.cv_folds;
        fit.report.cv_curve = std::move(choice.curve);
    }
    return fit;
}

inline ScaleFit fit_scale(const Dataset& data, const Ensemble& mu_hat, const SplitGrid& grid,
                          const ScaleConfig& cfg) {
    const auto rp = residual_powers(data, mu_hat, cfg.gamma, cfg.res_pow_floor);
    return fit_scale(bin_features(data, grid), rp, grid, cfg);
}

inline double predict_log_scale(const Ensemble& e, std::span<const double> x) { return e.predict(x); }

}  // namespace bgnd
