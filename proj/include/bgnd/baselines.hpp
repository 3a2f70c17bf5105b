#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bgnd/dataset.hpp"
#include "bgnd/error.hpp"
#include "bgnd/schema.hpp"
#include "bgnd/serialize.hpp"
#include "bgnd/timestamp.hpp"

namespace bgnd {

inline constexpr int kGlmMaxIters = 100;
inline constexpr double kGlmGradTol = 1e-8;

/// Intercept plus a subset of dataset features. One-hot groups drop their
/// first level (reference coding) so the intercept stays identifiable.
struct LinearDesign {
    std::vector<std::string> feature_names;  // full dataset feature list
    std::vector<std::size_t> columns;        // features used, in order

    std::size_t n_coef() const { return columns.size() + 1; }

    std::vector<std::string> coef_names() const {
        std::vector<std::string> out{"(intercept)"};
        for (auto j : columns) out.push_back(feature_names[j]);
        return out;
    }

    double linear(const Eigen::VectorXd& coef, std::span<const double> x) const {
        if (x.size() != feature_names.size())
            throw InputError("model expects " + std::to_string(feature_names.size()) + " features, got " +
                             std::to_string(x.size()));
        double s = coef[0];
        for (std::size_t k = 0; k < columns.size(); ++k) s += coef[static_cast<Eigen::Index>(k + 1)] * x[columns[k]];
        return s;
    }
};

inline LinearDesign reference_design(const Dataset& d) {
    LinearDesign des;
    des.feature_names = d.feature_names;
    std::string prev_group;
    for (std::size_t j = 0; j < d.cols(); ++j) {
        const std::string group = d.one_hot_source.empty() ? "" : d.one_hot_source[j];
        if (!group.empty() && group != prev_group) {
            prev_group = group;
            continue;
        }
        if (group.empty()) prev_group.clear();
        des.columns.push_back(j);
    }
    return des;
}

namespace detail {

inline Eigen::MatrixXd design_matrix(const Dataset& d, const LinearDesign& des) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(d.rows), static_cast<Eigen::Index>(des.n_coef()));
    for (std::size_t i = 0; i < d.rows; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        X(r, 0) = 1.0;
        for (std::size_t k = 0; k < des.columns.size(); ++k) X(r, static_cast<Eigen::Index>(k + 1)) = d.at(i, des.columns[k]);
    }
    return X;
}

/// Throws naming the columns that are linear combinations of earlier ones.
inline void check_full_rank(const Eigen::MatrixXd& X, const LinearDesign& des) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() == X.cols()) return;
    const auto names = des.coef_names();
    std::string msg = "singular design; collinear column(s):";
    for (Eigen::Index k = qr.rank(); k < X.cols(); ++k) msg += " " + names[static_cast<std::size_t>(qr.colsPermutation().indices()[k])];
    throw InputError(msg);
}

inline void check_positive(const Dataset& d, const char* who) {
    if (!d.has_response()) throw InputError(std::string(who) + ": dataset has no response");
    for (std::size_t i = 0; i < d.rows; ++i)
        if (!(d.response[i] > 0.0) || !std::isfinite(d.response[i]))
            throw InputError(std::string(who) + ": response must be positive and finite (row " + std::to_string(i) + ")");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Exponential GLM: y | x ~ Exp(rate = exp(x'beta))
// ---------------------------------------------------------------------------

struct LinearExpModel {
    LinearDesign design;
    FeatureSchema schema;
    Eigen::VectorXd beta;
    Eigen::VectorXd se;  // observed information
    int iterations = 0;
    double grad_norm = 0.0;

    double rate(std::span<const double> x) const { return std::exp(design.linear(beta, x)); }
};

/// Mean log-likelihood n^-1 sum{x'beta - exp(x'beta) y}.
inline double exp_glm_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = X * beta;
    return (eta.array() - eta.array().exp() * y.array()).mean();
}

/// Newton with step halving from (log(1/mean y), 0, ...). Converged when the
/// mean-scaled score has sup-norm <= 1e-8.
inline LinearExpModel fit_exp_glm(const Dataset& d) {
    d.check_shape();
    detail::check_positive(d, "exp GLM");
    LinearExpModel m;
    m.design = reference_design(d);
    const Eigen::MatrixXd X = detail::design_matrix(d, m.design);
    detail::check_full_rank(X, m.design);
    const Eigen::Map<const Eigen::VectorXd> y(d.response.data(), static_cast<Eigen::Index>(d.rows));
    const double n = static_cast<double>(d.rows);

    m.beta = Eigen::VectorXd::Zero(X.cols());
    m.beta[0] = -std::log(y.mean());
    double ll = exp_glm_loglik(X, y, m.beta);
    for (int it = 0;; ++it) {
        const Eigen::ArrayXd ly = (X * m.beta).array().exp() * y.array();
        const Eigen::VectorXd grad = X.transpose() * (1.0 - ly).matrix() / n;
        m.grad_norm = grad.lpNorm<Eigen::Infinity>();
        m.iterations = it;
        if (m.grad_norm <= kGlmGradTol) {
            const Eigen::MatrixXd info = X.transpose() * ly.matrix().asDiagonal() * X;
            m.se = info.inverse().diagonal().cwiseSqrt();
            return m;
        }
        if (it == kGlmMaxIters)
            throw NumericalError("exp GLM: no convergence after " + std::to_string(kGlmMaxIters) +
                                 " iterations (gradient sup-norm " + format_double(m.grad_norm) + ")");
        const Eigen::MatrixXd H = X.transpose() * ly.matrix().asDiagonal() * X / n;
        const Eigen::VectorXd step = H.ldlt().solve(grad);
        double t = 1.0;
        for (int h = 0; h < 60; ++h, t *= 0.5) {
            const Eigen::VectorXd cand = m.beta + t * step;
            const double ll_c = exp_glm_loglik(X, y, cand);
            if (std::isfinite(ll_c) && ll_c >= ll) {
                m.beta = cand;
                ll = ll_c;
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Log-normal: log y | x ~ N(x'loc_coef, exp(x'theta)^2)
// ---------------------------------------------------------------------------

struct LinearLogNormalModel {
    LinearDesign design;
    FeatureSchema schema;
    Eigen::VectorXd loc_coef;
    Eigen::VectorXd theta;
    Eigen::VectorXd loc_se;    // heteroskedasticity-robust
    Eigen::VectorXd theta_se;  // observed information of the profiled likelihood
    int iterations = 0;
    double grad_norm = 0.0;

    double mu_ln(std::span<const double> x) const { return design.linear(loc_coef, x); }
    double sigma_ln(std::span<const double> x) const { return std::exp(design.linear(theta, x)); }
};

/// Profiled mean negative log-likelihood n^-1 sum{x'theta + r^2 exp(-2x'theta)/2}.
inline double lognormal_profile_nll(const Eigen::MatrixXd& X, const Eigen::ArrayXd& r2, const Eigen::VectorXd& theta) {
    const Eigen::ArrayXd eta = (X * theta).array();
    return (eta + 0.5 * r2 * (-2.0 * eta).exp()).mean();
}

/// loc_coef by OLS of log y, then theta by Newton on the profiled likelihood
/// of the squared residuals, starting from (log rms residual, 0, ...).
inline LinearLogNormalModel fit_lognormal_mle(const Dataset& d) {
    d.check_shape();
    detail::check_positive(d, "log-normal");
    LinearLogNormalModel m;
    m.design = reference_design(d);
    const Eigen::MatrixXd X = detail::design_matrix(d, m.design);
    detail::check_full_rank(X, m.design);
    Eigen::VectorXd z(static_cast<Eigen::Index>(d.rows));
    for (std::size_t i = 0; i < d.rows; ++i) z[static_cast<Eigen::Index>(i)] = std::log(d.response[i]);
    const double n = static_cast<double>(d.rows);

    m.loc_coef = X.colPivHouseholderQr().solve(z);
    const Eigen::ArrayXd r = (z - X * m.loc_coef).array();
    const Eigen::ArrayXd r2 = r.square();
    // residuals at rounding level mean log y is an exact linear fit
    if (!(r2.mean() > 1e-24 * std::max(1.0, z.squaredNorm() / n)))
        throw NumericalError("log-normal: zero residual variance");
    {
        const Eigen::MatrixXd XtXi = (X.transpose() * X).inverse();
        const Eigen::MatrixXd meat = X.transpose() * r2.matrix().asDiagonal() * X;
        m.loc_se = (XtXi * meat * XtXi).diagonal().cwiseSqrt();
    }

    m.theta = Eigen::VectorXd::Zero(X.cols());
    m.theta[0] = std::log(std::sqrt(r2.mean()));
    double nll = lognormal_profile_nll(X, r2, m.theta);
    for (int it = 0;; ++it) {
        const Eigen::ArrayXd w = r2 * (-2.0 * (X * m.theta).array()).exp();
        const Eigen::VectorXd grad = X.transpose() * (1.0 - w).matrix() / n;
        m.grad_norm = grad.lpNorm<Eigen::Infinity>();
        m.iterations = it;
        const Eigen::MatrixXd H = 2.0 * X.transpose() * w.matrix().asDiagonal() * X / n;
        if (m.grad_norm <= kGlmGradTol) {
            m.theta_se = (H * n).inverse().diagonal().cwiseSqrt();
            return m;
        }
        if (it == kGlmMaxIters)
            throw NumericalError("log-normal: no convergence after " + std::to_string(kGlmMaxIters) +
                                 " iterations (gradient sup-norm " + format_double(m.grad_norm) + ")");
        const Eigen::VectorXd step = H.ldlt().solve(grad);
        double t = 1.0;
        for (int h = 0; h < 60; ++h, t *= 0.5) {
            const Eigen::VectorXd cand = m.theta - t * step;
            const double c = lognormal_profile_nll(X, r2, cand);
            if (std::isfinite(c) && c <= nll) {
                m.theta = cand;
                nll = c;
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Historical average over 21 week bins
// ---------------------------------------------------------------------------

struct HistoricalAverage {
    FeatureSchema schema;
    std::vector<std::string> feature_names;
    std::array<double, kWeekBins> means{};
    std::array<std::size_t, kWeekBins> counts{};
    double global_mean = 0.0;

    bool is_fallback(std::size_t bin) const { return counts.at(bin) == 0; }
    double predict(double week_hours) const { return means[week_bin(week_hours)]; }
};

/// Empty bins take the global mean and are flagged by a zero count.
inline HistoricalAverage fit_historical_average(std::span<const double> week_hours, std::span<const double> y) {
    if (week_hours.size() != y.size()) throw InputError("historical average: timestamp/response length mismatch");
    if (y.empty()) throw InputError("historical average: no rows (is there a timestamp column?)");
    HistoricalAverage h;
    std::array<double, kWeekBins> sum{};
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i])) throw InputError("historical average: non-finite response at row " + std::to_string(i));
        const auto b = week_bin(week_hours[i]);
        sum[b] += y[i];
        ++h.counts[b];
        total += y[i];
    }
    h.global_mean = total / static_cast<double>(y.size());
    for (std::size_t b = 0; b < kWeekBins; ++b)
        h.means[b] = h.counts[b] ? sum[b] / static_cast<double>(h.counts[b]) : h.global_mean;
    return h;
}

inline HistoricalAverage fit_historical_average(const Dataset& d) {
    if (!d.has_timestamps()) throw InputError("historical average needs a timestamp column");
    if (!d.has_response()) throw InputError("historical average: dataset has no response");
    auto h = fit_historical_average(d.week_hours, d.response);
    h.feature_names = d.feature_names;
    return h;
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

namespace detail {

inline Json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vec_from_json(const Json& j, std::size_t expect, const char* what) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != expect) throw InputError(std::string(what) + ": expected " + std::to_string(expect) + " values");
    for (double x : v)
        if (!std::isfinite(x)) throw InputError(std::string(what) + ": non-finite value");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Json design_json(const LinearDesign& d) { return Json{{"names", d.coef_names()}, {"columns", d.columns}}; }

inline LinearDesign design_from_json(const Json& j, std::vector<std::string> feature_names) {
    LinearDesign d;
    d.feature_names = std::move(feature_names);
    d.columns = j.at("columns").get<std::vector<std::size_t>>();
    for (auto c : d.columns)
        if (c >= d.feature_names.size()) throw InputError("design column " + std::to_string(c) + " out of range");
    return d;
}

template <class F>
auto wrap_json_errors(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const Json::exception& e) {
        throw InputError(what + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError(what + ": " + e.what());
    }
}

}  // namespace detail

inline Json model_to_json(const LinearExpModel& m) {
    return Json{{"version", kModelFileVersion},
                {"kind", "exp_glm"},
                {"schema", schema_to_json(m.schema, m.design.feature_names)},
                {"design", detail::design_json(m.design)},
                {"beta", detail::vec_json(m.beta)},
                {"se", detail::vec_json(m.se)},
                {"iterations", m.iterations},
                {"grad_norm", m.grad_norm}};
}

inline Json model_to_json(const LinearLogNormalModel& m) {
    return Json{{"version", kModelFileVersion},
                {"kind", "lognormal"},
                {"schema", schema_to_json(m.schema, m.design.feature_names)},
                {"design", detail::design_json(m.design)},
                {"loc_coef", detail::vec_json(m.loc_coef)},
                {"theta", detail::vec_json(m.theta)},
                {"loc_se", detail::vec_json(m.loc_se)},
                {"theta_se", detail::vec_json(m.theta_se)},
                {"iterations", m.iterations},
                {"grad_norm", m.grad_norm}};
}

inline Json model_to_json(const HistoricalAverage& h) {
    return Json{{"version", kModelFileVersion},
                {"kind", "histavg"},
                {"schema", schema_to_json(h.schema, h.feature_names)},
                {"global_mean", h.global_mean},
                {"means", h.means},
                {"counts", h.counts}};
}

inline LinearExpModel exp_glm_from_json(const Json& j, const std::string& what = "model") {
    return detail::wrap_json_errors(what, [&] {
        LinearExpModel m;
        std::vector<std::string> names;
        m.schema = schema_from_json(j.at("schema"), names);
        m.design = detail::design_from_json(j.at("design"), std::move(names));
        m.beta = detail::vec_from_json(j.at("beta"), m.design.n_coef(), "beta");
        m.se = detail::vec_from_json(j.at("se"), m.design.n_coef(), "se");
        m.iterations = j.at("iterations").get<int>();
        m.grad_norm = j.at("grad_norm").get<double>();
        return m;
    });
}

inline LinearLogNormalModel lognormal_from_json(const Json& j, const std::string& what = "model") {
    return detail::wrap_json_errors(what, [&] {
        LinearLogNormalModel m;
        std::vector<std::string> names;
        m.schema = schema_from_json(j.at("schema"), names);
        m.design = detail::design_from_json(j.at("design"), std::move(names));
        const auto k = m.design.n_coef();
        m.loc_coef = detail::vec_from_json(j.at("loc_coef"), k, "loc_coef");
        m.theta = detail::vec_from_json(j.at("theta"), k, "theta");
        m.loc_se = detail::vec_from_json(j.at("loc_se"), k, "loc_se");
        m.theta_se = detail::vec_from_json(j.at("theta_se"), k, "theta_se");
        m.iterations = j.at("iterations").get<int>();
        m.grad_norm = j.at("grad_norm").get<double>();
        return m;
    });
}

inline HistoricalAverage histavg_from_json(const Json& j, const std::string& what = "model") {
    return detail::wrap_json_errors(what, [&] {
        HistoricalAverage h;
        h.schema = schema_from_json(j.at("schema"), h.feature_names);
        h.global_mean = j.at("global_mean").get<double>();
        h.means = j.at("means").get<std::array<double, kWeekBins>>();
        h.counts = j.at("counts").get<std::array<std::size_t, kWeekBins>>();
        for (double v : h.means)
            if (!std::isfinite(v)) throw InputError("non-finite bin mean");
        return h;
    });
}

}  // namespace bgnd
