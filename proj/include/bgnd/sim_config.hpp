#pragma once

// Only translation units that read simulation configs include this; toml++
// is heavy to compile.

#include <sstream>
#include <string>
#include <string_view>

#include "bgnd/error.hpp"
#include "bgnd/simulate.hpp"
#include "toml.hpp"

namespace bgnd {

namespace detail {

inline std::vector<double> toml_doubles(const toml::array& a, const std::string& key) {
    std::vector<double> out;
    for (const auto& v : a) {
        const auto d = v.value<double>();
        if (!d) throw InputError("sim config: '" + key + "' must hold numbers");
        out.push_back(*d);
    }
    return out;
}

template <class T>
T toml_get(const toml::table& t, std::string_view key, T fallback) {
    const auto node = t[key];
    if (!node) return fallback;
    const auto v = node.value<T>();
    if (!v) throw InputError("sim config: '" + std::string(key) + "' has the wrong type");
    return *v;
}

}  // namespace detail

/// Top level: kind, n, seed, gamma, power, precision, response. A
/// [piecewise] table holds cuts (array of arrays), mu, b, noise_features and
/// timestamp; a [sinusoidal] table holds mu0, mu_day, mu_week, b0, b_day,
/// b_week and weeks.
inline SimConfig parse_sim_config(const toml::table& t) {
    SimConfig c;
    const auto kind = detail::toml_get<std::string>(t, "kind", "piecewise-cells");
    if (kind == "piecewise-cells") c.kind = SimKind::piecewise_cells;
    else if (kind == "sinusoidal-time") c.kind = SimKind::sinusoidal_time;
    else throw InputError("sim config: unknown kind '" + kind + "' (piecewise-cells | sinusoidal-time)");
    const auto n = detail::toml_get<std::int64_t>(t, "n", 1000);
    const auto seed = detail::toml_get<std::int64_t>(t, "seed", 0);
    if (n <= 0) throw InputError("sim config: n must be positive");
    if (seed < 0) throw InputError("sim config: seed must be >= 0");
    c.n = static_cast<std::size_t>(n);
    c.seed = static_cast<std::uint64_t>(seed);
    c.gamma = detail::toml_get<double>(t, "gamma", c.gamma);
    c.power = detail::toml_get<double>(t, "power", c.power);
    c.precision = static_cast<int>(detail::toml_get<std::int64_t>(t, "precision", c.precision));
    c.response = detail::toml_get<std::string>(t, "response", c.response);

    if (const auto* p = t["piecewise"].as_table()) {
        if (const auto* cuts = (*p)["cuts"].as_array()) {
            for (const auto& row : *cuts) {
                const auto* a = row.as_array();
                if (!a) throw InputError("sim config: piecewise.cuts must be an array of arrays");
                c.piecewise.cuts.push_back(detail::toml_doubles(*a, "piecewise.cuts"));
            }
        }
        if (const auto* a = (*p)["mu"].as_array()) c.piecewise.mu = detail::toml_doubles(*a, "piecewise.mu");
        if (const auto* a = (*p)["b"].as_array()) c.piecewise.b = detail::toml_doubles(*a, "piecewise.b");
        const auto nf = detail::toml_get<std::int64_t>(*p, "noise_features", 0);
        if (nf < 0) throw InputError("sim config: noise_features must be >= 0");
        c.piecewise.noise_features = static_cast<std::size_t>(nf);
        c.piecewise.timestamp = detail::toml_get<bool>(*p, "timestamp", false);
    } else if (c.kind == SimKind::piecewise_cells) {
        throw InputError("sim config: kind piecewise-cells needs a [piecewise] table");
    }
    if (const auto* s = t["sinusoidal"].as_table()) {
        auto& q = c.sinusoidal;
        q.mu0 = detail::toml_get<double>(*s, "mu0", q.mu0);
        q.mu_day = detail::toml_get<double>(*s, "mu_day", q.mu_day);
        q.mu_week = detail::toml_get<double>(*s, "mu_week", q.mu_week);
        q.b0 = detail::toml_get<double>(*s, "b0", q.b0);
        q.b_day = detail::toml_get<double>(*s, "b_day", q.b_day);
        q.b_week = detail::toml_get<double>(*s, "b_week", q.b_week);
        const auto w = detail::toml_get<std::int64_t>(*s, "weeks", static_cast<std::int64_t>(q.weeks));
        if (w <= 0) throw InputError("sim config: weeks must be positive");
        q.weeks = static_cast<std::size_t>(w);
    }
    validate(c);
    return c;
}

inline SimConfig parse_sim_config_text(std::string_view text, const std::string& what = "sim config") {
    try {
        return parse_sim_config(toml::parse(text, what));
    } catch (const toml::parse_error& e) {
        throw InputError(what + ": " + std::string(e.description()) + " at line " +
                         std::to_string(e.source().begin.line));
    }
}

/// The resolved config, defaults filled in, as TOML text under [sim].
inline std::string sim_config_to_toml(const SimConfig& c) {
    const auto arr = [](const std::vector<double>& v) {
        toml::array a;
        for (double x : v) a.push_back(x);
        return a;
    };
    toml::table t{{"kind", c.kind == SimKind::piecewise_cells ? "piecewise-cells" : "sinusoidal-time"},
                  {"n", static_cast<std::int64_t>(c.n)},
                  {"seed", static_cast<std::int64_t>(c.seed)},
                  {"gamma", c.gamma},
                  {"power", c.power},
                  {"precision", c.precision},
                  {"response", c.response}};
    if (c.kind == SimKind::piecewise_cells) {
        toml::array cuts;
        for (const auto& v : c.piecewise.cuts) cuts.push_back(arr(v));
        t.insert("piecewise", toml::table{{"cuts", cuts},
                                          {"mu", arr(c.piecewise.mu)},
                                          {"b", arr(c.piecewise.b)},
                                          {"noise_features", static_cast<std::int64_t>(c.piecewise.noise_features)},
                                          {"timestamp", c.piecewise.timestamp}});
    } else {
        const auto& q = c.sinusoidal;
        t.insert("sinusoidal", toml::table{{"mu0", q.mu0},
                                           {"mu_day", q.mu_day},
                                           {"mu_week", q.mu_week},
                                           {"b0", q.b0},
                                           {"b_day", q.b_day},
                                           {"b_week", q.b_week},
                                           {"weeks", static_cast<std::int64_t>(q.weeks)}});
    }
    std::ostringstream out;
    out << toml::table{{"sim", std::move(t)}} << '\n';
    return out.str();
}

inline SimConfig load_sim_config(const std::string& path) { return parse_sim_config_text(read_file(path), path); }

}  // namespace bgnd
