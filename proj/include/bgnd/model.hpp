#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bgnd/boost_location.hpp"
#include "bgnd/boost_scale.hpp"
#include "bgnd/crps.hpp"
#include "bgnd/dataset.hpp"
#include "bgnd/error.hpp"
#include "bgnd/gnd.hpp"
#include "bgnd/rng.hpp"
#include "bgnd/schema.hpp"
#include "bgnd/serialize.hpp"
#include "bgnd/transforms.hpp"

namespace bgnd {

struct FitConfig {
    LocationConfig location;
    ScaleConfig scale;  // scale.gamma is overwritten by the model's gamma
    bool crossfit = true;
    std::size_t max_bins = kDefaultMaxBins;
    std::uint64_t seed = 0;
};

/// Location and log-scale ensembles fitted on complementary halves.
struct FitDirection {
    Ensemble location;
    Ensemble log_scale;
    FitReport location_report;
    FitReport scale_report;
};

struct BgndModel {
    double gamma = 2.0;
    PowerTransform transform = PowerTransform::identity();
    bool crossfit = true;
    std::vector<std::string> feature_names;
    FeatureSchema schema;  // empty columns when fitted from a bare Dataset
    std::vector<FitDirection> directions;
    Json metadata = Json::object();

    std::size_t n_features() const { return feature_names.size(); }
};

namespace detail {

inline void check_positive_response(const Dataset& data, const PowerTransform& t) {
    if (!t.requires_positive()) return;
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < data.rows; ++i)
        if (!(data.response[i] > 0.0)) bad.push_back(i);
    if (bad.empty()) return;
    std::string msg = std::to_string(bad.size()) + " non-positive response value(s) under power " +
                      format_double(t.power()) + " transform; rows";
    for (std::size_t k = 0; k < bad.size() && k < 10; ++k) msg += " " + std::to_string(bad[k]);
    if (bad.size() > 10) msg += " ...";
    throw InputError(msg);
}

inline FitDirection fit_direction(const BinnedMatrix& x, std::span<const double> z, const SplitGrid& grid,
                                  std::span<const std::size_t> s1, std::span<const std::size_t> s2,
                                  const FitConfig& cfg) {
    FitDirection d;
    const BinnedMatrix x1 = x.subset(s1), x2 = x.subset(s2);
    std::vector<double> z1, z2;
    for (std::size_t i : s1) z1.push_back(z[i]);
    for (std::size_t i : s2) z2.push_back(z[i]);

    LocationFit loc = fit_location(x1, z1, grid, cfg.location);
    std::vector<double> rp(x2.rows);
    for (std::size_t i = 0; i < x2.rows; ++i) {
        const double r = std::pow(std::abs(z2[i] - loc.ensemble.predict_binned(x2.row(i))), cfg.scale.gamma);
        if (!std::isfinite(r)) throw NumericalError("fit: non-finite residual");
        rp[i] = r;
    }
    ScaleFit sc = fit_scale(x2, rp, grid, cfg.scale);
    d.location = std::move(loc.ensemble);
    d.location_report = std::move(loc.report);
    d.log_scale = std::move(sc.ensemble);
    d.scale_report = std::move(sc.report);
    return d;
}

inline Json config_to_json(const FitConfig& c, double gamma, const PowerTransform& t) {
    const auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json("auto"); };
    return Json{{"gamma", gamma},
                {"power", t.power()},
                {"crossfit", c.crossfit},
                {"max_bins", c.max_bins},
                {"seed", c.seed},
                {"location",
                 {{"depth", c.location.depth},
                  {"shrinkage", c.location.shrinkage},
                  {"max_iters", c.location.max_iters},
                  {"cv_folds", c.location.cv_folds},
                  {"depth_grid", c.location.depth_grid},
                  {"patience", c.location.patience}}},
                {"scale",
                 {{"epsilon", c.scale.epsilon},
                  {"nu", opt(c.scale.nu)},
                  {"psi", opt(c.scale.psi)},
                  {"max_iters", c.scale.max_iters},
                  {"depth", c.scale.depth},
                  {"max_depth", c.scale.max_depth},
                  {"grad_tol", c.scale.grad_tol},
                  {"line_search_tol", c.scale.line_search_tol},
                  {"res_pow_floor", c.scale.res_pow_floor},
                  {"cv_folds", c.scale.cv_folds},
                  {"depth_grid", c.scale.depth_grid},
                  {"patience", c.scale.patience}}}};
}

}  // namespace detail

/// Seeded equal split: the first ceil(n/2) positions of a Fisher-Yates
/// shuffle form S1, the rest S2.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_halves(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    const std::size_t n1 = (n + 1) / 2;
    return {std::vector<std::size_t>(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n1)),
            std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(n1), perm.end())};
}

/// Two-stage fit on explicit halves: location on s1, scale on s2 (and the
/// reverse when cross-fitting). Stage CV seeds derive from cfg.seed.
inline BgndModel fit_with_split(const Dataset& data, double gamma, const PowerTransform& t, const FitConfig& cfg,
                                std::span<const std::size_t> s1, std::span<const std::size_t> s2) {
    data.check_shape();
    if (!data.has_response()) throw InputError("fit: dataset has no response");
    if (data.rows < 40) throw InputError("fit: need at least 40 rows, got " + std::to_string(data.rows));
    if (!(gamma >= 1.0) || !std::isfinite(gamma)) throw std::invalid_argument("fit: gamma must be >= 1");
    detail::check_positive_response(data, t);

    std::vector<double> z(data.rows);
    for (std::size_t i = 0; i < data.rows; ++i) {
        z[i] = t.forward(data.response[i]);
        if (!std::isfinite(z[i])) throw InputError("fit: non-finite transformed response at row " + std::to_string(i));
    }
    FitConfig c = cfg;
    c.scale.gamma = gamma;
    c.location.seed = cfg.seed + 1;
    c.scale.seed = cfg.seed + 2;
    const SplitGrid grid = build_grid(data, cfg.max_bins);
    const BinnedMatrix x = bin_features(data, grid);

    BgndModel m;
    m.gamma = gamma;
    m.transform = t;
    m.crossfit = cfg.crossfit;
    m.feature_names = data.feature_names;
    m.directions.push_back(detail::fit_direction(x, z, grid, s1, s2, c));
    if (cfg.crossfit) m.directions.push_back(detail::fit_direction(x, z, grid, s2, s1, c));

    m.metadata["n"] = data.rows;
    m.metadata["n_s1"] = s1.size();
    m.metadata["n_s2"] = s2.size();
    m.metadata["config"] = detail::config_to_json(c, gamma, t);
    Json reports = Json::array();
    for (const auto& d : m.directions)
        reports.push_back(Json{{"location", report_to_json(d.location_report)},
                               {"scale", report_to_json(d.scale_report)}});
    m.metadata["reports"] = std::move(reports);
    return m;
}

inline BgndModel fit(const Dataset& data, double gamma, const PowerTransform& t, const FitConfig& cfg) {
    data.check_shape();
    const auto [s1, s2] = split_halves(data.rows, cfg.seed);
    return fit_with_split(data, gamma, t, cfg, s1, s2);
}

/// (mu, b) on the transformed scale; with two directions, mu and beta are
/// averaged before b = exp(-beta / gamma).
inline GndParams predict_params(const BgndModel& m, std::span<const double> x) {
    if (x.size() != m.n_features())
        throw InputError("model expects " + std::to_string(m.n_features()) + " features, got " +
                         std::to_string(x.size()));
    if (m.directions.empty()) throw InputError("model has no fitted directions");
    double mu = 0.0, beta = 0.0;
    for (const auto& d : m.directions) {
        mu += predict_location(d.location, x);
        beta += predict_log_scale(d.log_scale, x);
    }
    const double k = static_cast<double>(m.directions.size());
    mu /= k;
    beta /= k;
    const double b = std::exp(-beta / m.gamma);
    if (!(b > 0.0) || !std::isfinite(b)) throw NumericalError("predicted scale is not positive and finite");
    return {mu, b, m.gamma};
}

inline double predict_cdf(const BgndModel& m, std::span<const double> x, double y) {
    return pushforward_cdf(m.transform, predict_params(m, x), y);
}

inline double predict_sf(const BgndModel& m, std::span<const double> x, double y) {
    return pushforward_sf(m.transform, predict_params(m, x), y);
}

inline double predict_quantile(const BgndModel& m, std::span<const double> x, double q, ClipCounter* clips = nullptr) {
    return pushforward_quantile(m.transform, predict_params(m, x), q, clips);
}

/// Closed form for normal and log-normal forecasts (gamma = 2 with identity
/// or log transform), quantile quadrature otherwise.
inline double gnd_forecast_crps(const PowerTransform& t, const GndParams& p, double y, const QuantileGrid* grid) {
    if (p.gamma == 2.0 && t.is_identity()) return crps_normal(p.mu, p.b, y);
    if (p.gamma == 2.0 && t.is_log()) return crps_lognormal(p.mu, p.b, y);
    if (grid) {
        if (grid->gamma() != p.gamma) throw std::invalid_argument("crps: quantile grid built for another shape");
        return pushforward_crps(t, p, y, *grid);
    }
    return pushforward_crps(t, p, y, kDefaultCrpsLevels);
}

inline double forecast_crps(const BgndModel& m, std::span<const double> x, double y, const QuantileGrid* grid = nullptr) {
    return gnd_forecast_crps(m.transform, predict_params(m, x), y, grid);
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

inline Json model_to_json(const BgndModel& m) {
    Json dirs = Json::array();
    for (const auto& d : m.directions)
        dirs.push_back(Json{{"location", ensemble_to_json(d.location)}, {"log_scale", ensemble_to_json(d.log_scale)}});
    return Json{{"version", kModelFileVersion},
                {"kind", "bgnd"},
                {"gamma", m.gamma},
                {"power", m.transform.power()},
                {"crossfit", m.crossfit},
                {"schema", schema_to_json(m.schema, m.feature_names)},
                {"directions", std::move(dirs)},
                {"metadata", m.metadata}};
}

inline BgndModel model_from_json(const Json& j, const std::string& what = "model") {
    try {
        BgndModel m;
        m.gamma = j.at("gamma").get<double>();
        if (!(m.gamma >= 1.0) || !std::isfinite(m.gamma)) throw InputError("gamma must be >= 1");
        m.transform = PowerTransform(j.at("power").get<double>());
        m.crossfit = j.at("crossfit").get<bool>();
        m.schema = schema_from_json(j.at("schema"), m.feature_names);
        for (const auto& jd : j.at("directions")) {
            FitDirection d;
            d.location = ensemble_from_json(jd.at("location"));
            d.log_scale = ensemble_from_json(jd.at("log_scale"));
            if (d.location.n_features != m.n_features() || d.log_scale.n_features != m.n_features())
                throw InputError("ensemble feature count does not match the schema");
            m.directions.push_back(std::move(d));
        }
        if (m.directions.empty() || m.directions.size() > 2) throw InputError("expected one or two fit directions");
        if (m.crossfit != (m.directions.size() == 2)) throw InputError("crossfit flag does not match direction count");
        if (j.contains("metadata")) m.metadata = j["metadata"];
        return m;
    } catch (const Json::exception& e) {
        throw InputError(what + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError(what + ": " + e.what());
    } catch (const std::domain_error& e) {
        throw InputError(what + ": " + e.what());
    }
}

inline void save_model(const BgndModel& m, const std::string& path) { write_json_file(model_to_json(m), path); }

inline BgndModel load_model(const std::string& path) { return model_from_json(read_model_envelope(path, "bgnd"), path); }

}  // namespace bgnd
