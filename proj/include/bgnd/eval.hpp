#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "bgnd/baselines.hpp"
#include "bgnd/crps.hpp"
#include "bgnd/csv.hpp"
#include "bgnd/error.hpp"
#include "bgnd/model.hpp"

namespace bgnd {

inline constexpr double kAnnualHeartAttacks = 805000.0;
inline constexpr double kGoldenHourEffect = 0.028;

/// A per-row predictive distribution on the original response scale.
struct Forecast {
    enum class Kind { gnd, exponential, point };
    Kind kind = Kind::point;
    PowerTransform transform;  // gnd only
    GndParams params{0.0, 1.0, 2.0};
    double rate = 1.0;   // exponential only
    double value = 0.0;  // point only

    static Forecast gnd(const PowerTransform& t, const GndParams& p) {
        validate(p);
        Forecast f;
        f.kind = Kind::gnd;
        f.transform = t;
        f.params = p;
        return f;
    }
    static Forecast exponential(double rate) {
        if (!(rate > 0.0) || !std::isfinite(rate)) throw NumericalError("exponential forecast: rate must be > 0");
        Forecast f;
        f.kind = Kind::exponential;
        f.rate = rate;
        return f;
    }
    static Forecast point(double v) {
        Forecast f;
        f.kind = Kind::point;
        f.value = v;
        return f;
    }

    double quantile(double q) const {
        switch (kind) {
            case Kind::gnd: return pushforward_quantile(transform, params, q);
            case Kind::exponential: return -std::log1p(-q) / rate;
            case Kind::point: return value;
        }
        return value;
    }

    /// P(Y > y).
    double sf(double y) const {
        switch (kind) {
            case Kind::gnd:
                if (transform.requires_positive() && !(y > 0.0)) return 1.0;
                return pushforward_sf(transform, params, y);
            case Kind::exponential: return y <= 0.0 ? 1.0 : std::exp(-rate * y);
            case Kind::point: return value > y ? 1.0 : 0.0;
        }
        return 0.0;
    }

    double crps(double y, const QuantileGrid* grid = nullptr) const {
        switch (kind) {
            case Kind::gnd: return gnd_forecast_crps(transform, params, y, grid);
            case Kind::exponential: return crps_exponential(rate, y);
            case Kind::point: return std::abs(y - value);
        }
        return 0.0;
    }
};

inline Forecast forecast_of(const BgndModel& m, std::span<const double> x) {
    return Forecast::gnd(m.transform, predict_params(m, x));
}

inline Forecast forecast_of(const LinearExpModel& m, std::span<const double> x) { return Forecast::exponential(m.rate(x)); }

inline Forecast forecast_of(const LinearLogNormalModel& m, std::span<const double> x) {
    return Forecast::gnd(PowerTransform::log(), {m.mu_ln(x), m.sigma_ln(x), 2.0});
}

inline Forecast forecast_of(const HistoricalAverage& h, double week_hours) { return Forecast::point(h.predict(week_hours)); }

/// Mean CRPS; GND rows needing quadrature share one grid per shape.
inline double crps_mean(std::span<const Forecast> f, std::span<const double> y,
                        std::size_t levels = kDefaultCrpsLevels) {
    if (f.size() != y.size())
        throw InputError("crps_mean: " + std::to_string(f.size()) + " forecasts for " + std::to_string(y.size()) +
                         " observations");
    if (f.empty()) throw InputError("crps_mean: no rows");
    std::map<double, QuantileGrid> grids;
    double sum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const QuantileGrid* g = nullptr;
        if (f[i].kind == Forecast::Kind::gnd) {
            const double gm = f[i].params.gamma;
            auto it = grids.find(gm);
            if (it == grids.end()) it = grids.emplace(gm, QuantileGrid(gm, levels)).first;
            g = &it->second;
        }
        sum += f[i].crps(y[i], g);
    }
    return sum / static_cast<double>(f.size());
}

inline double mean_pinball(std::span<const Forecast> f, std::span<const double> y, double alpha) {
    if (f.size() != y.size()) throw InputError("mean_pinball: length mismatch");
    if (f.empty()) throw InputError("mean_pinball: no rows");
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += pinball_loss(y[i], f[i].quantile(alpha), alpha);
    return s / static_cast<double>(f.size());
}

/// Underage-to-overage cost ratio of announcing the alpha-quantile.
inline double cost_ratio(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("cost_ratio: alpha must be in (0,1)");
    return alpha / (1.0 - alpha);
}

inline double round_sig(double x, int digits = 2) {
    if (x == 0.0 || !std::isfinite(x)) return x;
    const double mag = std::floor(std::log10(std::abs(x)));
    const double scale = std::pow(10.0, static_cast<double>(digits - 1) - mag);
    return std::round(x * scale) / scale;
}

inline double crps_reduction_pct(double bench, double candidate) {
    if (!(bench > 0.0)) throw NumericalError("crps reduction: benchmark CRPS must be positive");
    return 100.0 * (bench - candidate) / bench;
}

struct LongWaitRow {
    double frac = 0.0;
    std::size_t flagged = 0;
    std::size_t true_positives = 0;
    double tpr = 0.0;
    double deaths_averted = 0.0;
};

/// Flags the top max(1, floor(f n)) rows by p_long (stable on ties) and
/// scores TPR as the share of flagged rows that actually waited long.
inline std::vector<LongWaitRow> long_wait_analysis(std::span<const double> p_long, const std::vector<bool>& actual_long,
                                                   std::span<const double> fracs,
                                                   double annual_n = kAnnualHeartAttacks,
                                                   double effect = kGoldenHourEffect) {
    const std::size_t n = p_long.size();
    if (n == 0) throw InputError("long-wait analysis: no rows");
    if (actual_long.size() != n) throw InputError("long-wait analysis: length mismatch");
    for (double p : p_long)
        if (!(p >= 0.0 && p <= 1.0)) throw InputError("long-wait analysis: probabilities must lie in [0,1]");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_long[a] > p_long[b]; });
    std::vector<LongWaitRow> out;
    for (double f : fracs) {
        if (!(f > 0.0 && f <= 1.0)) throw InputError("long-wait analysis: threshold fractions must be in (0,1]");
        LongWaitRow r;
        r.frac = f;
        r.flagged = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(f * static_cast<double>(n))));
        for (std::size_t k = 0; k < r.flagged; ++k) r.true_positives += actual_long[order[k]];
        r.tpr = static_cast<double>(r.true_positives) / static_cast<double>(r.flagged);
        r.deaths_averted = annual_n * f * r.tpr * effect;
        out.push_back(r);
    }
    return out;
}

/// Expected N(mu, sigma) negative log-likelihood under N(0, 1) data, up to a
/// constant.
inline double population_nll_normal(double mu, double sigma) {
    if (!(sigma > 0.0)) throw std::domain_error("population_nll_normal: sigma must be > 0");
    return std::log(sigma) + (1.0 + mu * mu) / (2.0 * sigma * sigma);
}

/// Central-difference Hessian with one Richardson step.
template <class F>
Eigen::Matrix2d fd_hessian(F&& f, double x, double y, double h = 1e-3) {
    const auto at = [&](double hh) {
        Eigen::Matrix2d H;
        const double f0 = f(x, y);
        H(0, 0) = (f(x + hh, y) - 2 * f0 + f(x - hh, y)) / (hh * hh);
        H(1, 1) = (f(x, y + hh) - 2 * f0 + f(x, y - hh)) / (hh * hh);
        H(0, 1) = H(1, 0) = (f(x + hh, y + hh) - f(x + hh, y - hh) - f(x - hh, y + hh) + f(x - hh, y - hh)) / (4 * hh * hh);
        return H;
    };
    return (4.0 * at(h / 2) - at(h)) / 3.0;
}

inline Eigen::Vector2d symmetric_eigenvalues(const Eigen::Matrix2d& H) {
    return Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(H).eigenvalues();
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ModelScores {
    std::string name;
    double crps = 0.0;
    double crps_reduction_pct = 0.0;  // vs the benchmark model
    std::vector<double> pinball;      // per alpha
    std::vector<LongWaitRow> long_wait;
};

struct EvalReport {
    std::string benchmark;
    std::vector<double> alphas;
    std::vector<double> threshold_fracs;
    double cutoff = 10.0;
    std::size_t rows = 0;
    std::size_t actual_long = 0;
    std::vector<ModelScores> models;
};

/// forecasts[k] holds model k's per-row forecasts; bench indexes the benchmark.
inline EvalReport evaluate(const std::vector<std::string>& names, const std::vector<std::vector<Forecast>>& forecasts,
                           std::span<const double> y, std::span<const double> alphas, std::span<const double> fracs,
                           double cutoff, std::size_t bench = 0) {
    if (names.size() != forecasts.size() || names.empty()) throw InputError("evaluate: need one name per model");
    if (bench >= names.size()) throw InputError("evaluate: benchmark index out of range");
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0)) throw InputError("evaluate: alphas must be in (0,1)");
    EvalReport r;
    r.benchmark = names[bench];
    r.alphas.assign(alphas.begin(), alphas.end());
    r.threshold_fracs.assign(fracs.begin(), fracs.end());
    r.cutoff = cutoff;
    r.rows = y.size();
    std::vector<bool> actual(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) actual[i] = y[i] > cutoff;
    r.actual_long = static_cast<std::size_t>(std::count(actual.begin(), actual.end(), true));
    for (std::size_t k = 0; k < names.size(); ++k) {
        ModelScores s;
        s.name = names[k];
        s.crps = crps_mean(forecasts[k], y);
        for (double a : alphas) s.pinball.push_back(mean_pinball(forecasts[k], y, a));
        std::vector<double> p(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) p[i] = forecasts[k][i].sf(cutoff);
        s.long_wait = long_wait_analysis(p, actual, fracs);
        r.models.push_back(std::move(s));
    }
    for (auto& s : r.models) s.crps_reduction_pct = crps_reduction_pct(r.models[bench].crps, s.crps);
    return r;
}

/// Writes summary.csv, pinball.csv, long_wait.csv and the long-format
/// report_long.csv (model, metric, value) into dir.
inline std::vector<std::string> write_report(const EvalReport& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const auto path = [&](const char* f) { return (std::filesystem::path(dir) / f).string(); };
    const auto fd = [](double v) { return format_double(v); };
    std::vector<std::string> written;

    {
        CsvWriter w(path("summary.csv"));
        w.row({"model", "crps", "crps_reduction_pct", "crps_reduction_pct_2sig", "benchmark"});
        for (const auto& s : r.models)
            w.row({s.name, fd(s.crps), fd(s.crps_reduction_pct), format_double(round_sig(s.crps_reduction_pct)), r.benchmark});
        written.push_back(path("summary.csv"));
    }
    {
        CsvWriter w(path("pinball.csv"));
        std::vector<std::string> head{"alpha", "cost_ratio", "cost_ratio_2sig"};
        for (const auto& s : r.models) head.push_back(s.name);
        w.row(head);
        for (std::size_t a = 0; a < r.alphas.size(); ++a) {
            std::vector<std::string> row{format_double(r.alphas[a]), fd(cost_ratio(r.alphas[a])), format_double(round_sig(cost_ratio(r.alphas[a])))};
            for (const auto& s : r.models) row.push_back(fd(s.pinball[a]));
            w.row(row);
        }
        written.push_back(path("pinball.csv"));
    }
    {
        CsvWriter w(path("long_wait.csv"));
        w.row({"model", "threshold_frac", "flagged", "true_positives", "tpr", "deaths_averted", "deaths_averted_2sig"});
        for (const auto& s : r.models)
            for (const auto& l : s.long_wait)
                w.row({s.name, format_double(l.frac), std::to_string(l.flagged), std::to_string(l.true_positives), fd(l.tpr),
                       fd(l.deaths_averted), format_double(round_sig(l.deaths_averted))});
        written.push_back(path("long_wait.csv"));
    }
    {
        CsvWriter w(path("report_long.csv"));
        w.row({"model", "metric", "value"});
        for (const auto& s : r.models) {
            w.row({s.name, "crps", fd(s.crps)});
            w.row({s.name, "crps_reduction_pct", fd(s.crps_reduction_pct)});
            for (std::size_t a = 0; a < r.alphas.size(); ++a)
                w.row({s.name, "pinball@" + format_double(r.alphas[a]), fd(s.pinball[a])});
            for (const auto& l : s.long_wait) {
                w.row({s.name, "tpr@" + format_double(l.frac), fd(l.tpr)});
                w.row({s.name, "deaths_averted@" + format_double(l.frac), fd(l.deaths_averted)});
            }
        }
        written.push_back(path("report_long.csv"));
    }
    return written;
}

}  // namespace bgnd
