#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "bgnd/csv.hpp"
#include "bgnd/dataset.hpp"
#include "bgnd/error.hpp"
#include "bgnd/gnd.hpp"
#include "bgnd/rng.hpp"
#include "bgnd/timestamp.hpp"
#include "bgnd/transforms.hpp"

namespace bgnd {

enum class SimKind { piecewise_cells, sinusoidal_time };

/// Features uniform on (0,1) and rounded to `precision` decimals; (mu, b)
/// constant on the grid of cells cut by `cuts`, listed row-major with the
/// last feature varying fastest.
struct PiecewiseSpec {
    std::vector<std::vector<double>> cuts;  // per feature, increasing, inside (0,1)
    std::vector<double> mu;
    std::vector<double> b;
    std::size_t noise_features = 0;  // extra uniform features with no effect
    bool timestamp = false;          // add an arrival column with no effect
};

/// Parameters depend on hour-of-week through the hour's midpoint h:
/// mu = mu0 + mu_day sin(2 pi h / 24) + mu_week sin(2 pi h / 168),
/// b  = b0 exp(b_day sin(2 pi h / 24) + b_week sin(2 pi h / 168)).
struct SinusoidalSpec {
    double mu0 = 2.0, mu_day = 0.5, mu_week = 0.2;
    double b0 = 0.5, b_day = 0.3, b_week = 0.0;
    std::size_t weeks = 8;
};

struct SimConfig {
    SimKind kind = SimKind::piecewise_cells;
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    double gamma = 2.0;
    double power = 1.0;
    int precision = 3;
    std::string response = "y";
    PiecewiseSpec piecewise;
    SinusoidalSpec sinusoidal;
};

struct TruthCell {
    std::string label;
    std::vector<double> lo, hi;  // feature box, or the hour range for time cells
    double mu = 0.0;
    double b = 1.0;
    std::size_t count = 0;
};

struct SimResult {
    Dataset data;
    std::vector<std::string> timestamps;  // formatted, empty without a time column
    std::vector<std::size_t> cell_of_row;
    std::vector<TruthCell> truth;
    std::size_t redraws = 0;  // draws outside the transform's range
};


inline void validate(const SimConfig& c) {
    if (c.n == 0) throw InputError("simulate: n must be positive");
    if (!(c.gamma >= 1.0) || !std::isfinite(c.gamma)) throw InputError("simulate: gamma must be >= 1");
    if (!(c.power >= 0.0 && c.power <= 1.0)) throw InputError("simulate: power must be in [0, 1]");
    if (c.precision < 1 || c.precision > 9) throw InputError("simulate: precision must be 1..9 decimals");
    if (c.response.empty()) throw InputError("simulate: empty response name");
    if (c.kind == SimKind::piecewise_cells) {
        const auto& p = c.piecewise;
        if (p.cuts.empty()) throw InputError("simulate: piecewise-cells needs at least one feature in cuts");
        std::size_t cells = 1;
        for (std::size_t j = 0; j < p.cuts.size(); ++j) {
            double prev = 0.0;
            for (double t : p.cuts[j]) {
                if (!(t > prev && t < 1.0))
                    throw InputError("simulate: cuts for feature " + std::to_string(j) + " must increase inside (0,1)");
                prev = t;
            }
            cells *= p.cuts[j].size() + 1;
        }
        if (p.mu.size() != cells || p.b.size() != cells)
            throw InputError("simulate: expected " + std::to_string(cells) + " mu and b values, got " +
                             std::to_string(p.mu.size()) + " and " + std::to_string(p.b.size()));
        for (std::size_t k = 0; k < cells; ++k) {
            if (!std::isfinite(p.mu[k])) throw InputError("simulate: cell " + std::to_string(k) + " has non-finite mu");
            if (!(p.b[k] > 0.0) || !std::isfinite(p.b[k]))
                throw InputError("simulate: cell " + std::to_string(k) + " needs b > 0");
        }
    } else {
        const auto& s = c.sinusoidal;
        if (!(s.b0 > 0.0)) throw InputError("simulate: b0 must be > 0");
        if (s.weeks == 0) throw InputError("simulate: weeks must be positive");
    }
}

namespace detail {

inline double round_to(double x, int decimals) {
    const double s = std::pow(10.0, decimals);
    return std::round(x * s) / s;
}

/// Redraws W until mu + b W lies where the inverse transform is one-to-one.
inline double draw_response(Rng& rng, double mu, double b, double gamma, const PowerTransform& t, std::size_t& redraws) {
    for (int k = 0; k < 10000; ++k) {
        const double z = mu + b * gnd_standard_draw(rng, gamma);
        if (t.is_identity() || t.is_log() || z > 0.0) return t.inverse(z);
        ++redraws;
    }
    throw InputError("simulate: transformed location is too far below zero for a positive response");
}

inline double sin_day(double h) { return std::sin(2.0 * std::numbers::pi * h / 24.0); }
inline double sin_week(double h) { return std::sin(2.0 * std::numbers::pi * h / 168.0); }

}  // namespace detail

inline SimResult simulate(const SimConfig& c) {
    validate(c);
    SimResult r;
    Rng rng(c.seed);
    const PowerTransform t(c.power);
    // a Monday, so week hours count from Monday 00:00
    const auto epoch = std::chrono::time_point_cast<std::chrono::seconds>(
        std::chrono::sys_days(std::chrono::year{2024} / 1 / 1));
    Dataset& d = r.data;
    d.rows = c.n;

    if (c.kind == SimKind::piecewise_cells) {
        const auto& p = c.piecewise;
        const std::size_t q = p.cuts.size();
        for (std::size_t j = 0; j < q + p.noise_features; ++j) d.feature_names.push_back("x" + std::to_string(j));
        // truth boxes, row-major
        std::vector<std::size_t> radix(q);
        std::size_t cells = 1;
        for (std::size_t j = q; j-- > 0;) {
            radix[j] = cells;
            cells *= p.cuts[j].size() + 1;
        }
        for (std::size_t k = 0; k < cells; ++k) {
            TruthCell tc;
            tc.label = "cell" + std::to_string(k);
            for (std::size_t j = 0; j < q; ++j) {
                const std::size_t pos = k / radix[j] % (p.cuts[j].size() + 1);
                tc.lo.push_back(pos == 0 ? 0.0 : p.cuts[j][pos - 1]);
                tc.hi.push_back(pos == p.cuts[j].size() ? 1.0 : p.cuts[j][pos]);
            }
            tc.mu = p.mu[k];
            tc.b = p.b[k];
            r.truth.push_back(std::move(tc));
        }
        for (std::size_t i = 0; i < c.n; ++i) {
            std::size_t cell = 0;
            for (std::size_t j = 0; j < q + p.noise_features; ++j) {
                // keep values strictly inside (0,1) after rounding
                double x = detail::round_to(rng.uniform(), c.precision);
                const double unit = std::pow(10.0, -c.precision);
                x = std::clamp(x, unit, 1.0 - unit);
                d.features.push_back(x);
                if (j < q) {
                    std::size_t pos = 0;
                    while (pos < p.cuts[j].size() && x >= p.cuts[j][pos]) ++pos;
                    cell += pos * radix[j];
                }
            }
            if (p.timestamp) {
                const double wh = 168.0 * rng.uniform();
                const auto ts = epoch + std::chrono::seconds(static_cast<long long>(std::floor(wh * 60.0)) * 60);
                r.timestamps.push_back(format_timestamp(ts));
                d.week_hours.push_back(parse_timestamp(r.timestamps.back())->week_hours());
            }
            const double y = detail::draw_response(rng, p.mu[cell], p.b[cell], c.gamma, t, r.redraws);
            d.response.push_back(y);
            r.cell_of_row.push_back(cell);
            ++r.truth[cell].count;
        }
        return r;
    }

    const auto& s = c.sinusoidal;
    for (std::size_t h = 0; h < 168; ++h) {
        const double mid = static_cast<double>(h) + 0.5;
        TruthCell tc;
        tc.label = "hour" + std::to_string(h);
        tc.lo = {static_cast<double>(h)};
        tc.hi = {static_cast<double>(h + 1)};
        tc.mu = s.mu0 + s.mu_day * detail::sin_day(mid) + s.mu_week * detail::sin_week(mid);
        tc.b = s.b0 * std::exp(s.b_day * detail::sin_day(mid) + s.b_week * detail::sin_week(mid));
        r.truth.push_back(std::move(tc));
    }
    const long long span_min = static_cast<long long>(s.weeks) * 168 * 60;
    for (std::size_t i = 0; i < c.n; ++i) {
        const auto minute = static_cast<long long>(rng.below(static_cast<std::uint64_t>(span_min)));
        const auto ts = epoch + std::chrono::seconds(minute * 60);
        r.timestamps.push_back(format_timestamp(ts));
        // same arithmetic as ingestion so hour cells agree bit for bit
        const double wh = parse_timestamp(r.timestamps.back())->week_hours();
        d.week_hours.push_back(wh);
        const auto cell = static_cast<std::size_t>(wh);
        const double y = detail::draw_response(rng, r.truth[cell].mu, r.truth[cell].b, c.gamma, t, r.redraws);
        d.response.push_back(y);
        r.cell_of_row.push_back(cell);
        ++r.truth[cell].count;
    }
    return r;
}

/// Data CSV: features, then the arrival column if any, then the response.
inline void write_sim_data(const SimResult& r, const SimConfig& c, const std::string& path) {
    CsvWriter w(path);
    std::vector<std::string> head = r.data.feature_names;
    const bool ts = !r.timestamps.empty();
    if (ts) head.push_back("arrived");
    head.push_back(c.response);
    w.row(head);
    char buf[32];
    for (std::size_t i = 0; i < r.data.rows; ++i) {
        std::vector<std::string> row;
        for (std::size_t j = 0; j < r.data.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.*f", c.precision, r.data.at(i, j));
            row.emplace_back(buf);
        }
        if (ts) row.push_back(r.timestamps[i]);
        row.push_back(format_double(r.data.response[i]));
        w.row(row);
    }
}

/// Truth CSV: one row per cell with its box, mu* and b* on the transformed
/// scale, and the simulated count.
inline void write_sim_truth(const SimResult& r, const SimConfig& c, const std::string& path) {
    CsvWriter w(path);
    std::vector<std::string> head{"cell"};
    const bool time = c.kind == SimKind::sinusoidal_time;
    const std::size_t q = r.truth.empty() ? 0 : r.truth.front().lo.size();
    if (time) {
        head.insert(head.end(), {"hour_lo", "hour_hi"});
    } else {
        for (std::size_t j = 0; j < q; ++j) {
            head.push_back("x" + std::to_string(j) + "_lo");
            head.push_back("x" + std::to_string(j) + "_hi");
        }
    }
    head.insert(head.end(), {"mu", "b", "gamma", "power", "count"});
    w.row(head);
    for (const auto& tc : r.truth) {
        std::vector<std::string> row{tc.label};
        for (std::size_t j = 0; j < q; ++j) {
            row.push_back(format_double(tc.lo[j]));
            row.push_back(format_double(tc.hi[j]));
        }
        row.insert(row.end(), {format_double(tc.mu), format_double(tc.b), format_double(c.gamma), format_double(c.power),
                               std::to_string(tc.count)});
        w.row(row);
    }
}

}  // namespace bgnd
