#pragma once

#include <algorithm>
#include <array>
#include <set>
#include <string>
#include <vector>

#include "bgnd/csv.hpp"
#include "bgnd/dataset.hpp"
#include "bgnd/error.hpp"
#include "bgnd/timestamp.hpp"

namespace bgnd {

enum class ColumnKind { numeric, categorical, timestamp };

inline const char* to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::timestamp: return "timestamp";
    }
    return "?";
}

inline ColumnKind column_kind_from(const std::string& s) {
    if (s == "numeric") return ColumnKind::numeric;
    if (s == "categorical") return ColumnKind::categorical;
    if (s == "timestamp") return ColumnKind::timestamp;
    throw InputError("unknown column kind '" + s + "'");
}

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::vector<std::string> levels;  // categorical only, sorted
};

/// How raw CSV columns become model features. Categorical columns expand to
/// one indicator per level ("col=level"); a timestamp column expands to its
/// four cyclic features and also supplies hour-of-week.
struct FeatureSchema {
    std::vector<ColumnSpec> columns;
    std::string response;

    std::vector<std::string> feature_names() const {
        std::vector<std::string> out;
        for (const auto& c : columns) {
            switch (c.kind) {
                case ColumnKind::numeric: out.push_back(c.name); break;
                case ColumnKind::categorical:
                    for (const auto& l : c.levels) out.push_back(c.name + "=" + l);
                    break;
                case ColumnKind::timestamp:
                    for (const char* s : {"_day_sin", "_day_cos", "_week_sin", "_week_cos"}) out.push_back(c.name + s);
                    break;
            }
        }
        return out;
    }

    bool operator==(const FeatureSchema& o) const {
        if (response != o.response || columns.size() != o.columns.size()) return false;
        for (std::size_t j = 0; j < columns.size(); ++j) {
            const auto &a = columns[j], &b = o.columns[j];
            if (a.name != b.name || a.kind != b.kind || a.levels != b.levels) return false;
        }
        return true;
    }
};

struct SchemaOptions {
    std::string response;                  // may be empty for feature-only tables
    std::vector<std::string> categorical;  // forced categorical
    std::vector<std::string> ignore;
};

/// A column is a timestamp if at least half its non-empty cells parse as
/// ISO-8601 dates, categorical if declared or at least half are non-numeric,
/// numeric otherwise. Categorical levels come from this table, sorted.
inline FeatureSchema infer_schema(const CsvTable& t, const SchemaOptions& opt) {
    FeatureSchema s;
    s.response = opt.response;
    if (!opt.response.empty() && !t.column(opt.response))
        throw InputError("response column '" + opt.response + "' not found");
    for (const auto& name : opt.categorical)
        if (!t.column(name)) throw InputError("categorical column '" + name + "' not found");
    const auto listed = [](const std::vector<std::string>& v, const std::string& x) {
        return std::find(v.begin(), v.end(), x) != v.end();
    };
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        const std::string& name = t.header[j];
        if (name == opt.response || listed(opt.ignore, name)) continue;
        ColumnSpec c{name, ColumnKind::numeric, {}};
        std::size_t nonempty = 0, non_numeric = 0, stamps = 0;
        std::set<std::string> levels;
        for (const auto& row : t.rows) {
            const std::string& v = row[j];
            if (v.empty()) continue;
            ++nonempty;
            levels.insert(v);
            if (!parse_number(v)) {
                ++non_numeric;
                if (parse_timestamp(v)) ++stamps;
            }
        }
        if (listed(opt.categorical, name)) {
            c.kind = ColumnKind::categorical;
        } else if (nonempty > 0 && 2 * stamps >= nonempty) {
            c.kind = ColumnKind::timestamp;
        } else if (nonempty > 0 && 2 * non_numeric >= nonempty) {
            c.kind = ColumnKind::categorical;
        }
        if (c.kind == ColumnKind::categorical) c.levels.assign(levels.begin(), levels.end());
        s.columns.push_back(std::move(c));
    }
    return s;
}

struct IngestResult {
    Dataset data;
    std::size_t dropped = 0;
    std::vector<std::size_t> dropped_lines;  // source lines of dropped rows
    std::vector<std::size_t> kept_lines;     // source line of each dataset row
};

/// Encodes a table under a fixed schema. Rows with an empty or unparseable
/// cell in a used column are dropped and counted. A categorical value absent
/// from the schema's levels encodes as all zeros. The response is required
/// only when need_response is set.
inline IngestResult encode_table(const CsvTable& t, const FeatureSchema& s, bool need_response) {
    std::vector<std::size_t> col_idx;
    for (const auto& c : s.columns) {
        const auto j = t.column(c.name);
        if (!j) throw InputError("column '" + c.name + "' required by the model schema is missing");
        col_idx.push_back(*j);
    }
    std::optional<std::size_t> resp_idx;
    if (!s.response.empty()) resp_idx = t.column(s.response);
    if (need_response && !resp_idx) throw InputError("response column '" + s.response + "' not found");

    IngestResult r;
    Dataset& d = r.data;
    d.feature_names = s.feature_names();
    d.one_hot_source.clear();
    bool has_onehot = false;
    for (const auto& c : s.columns) {
        switch (c.kind) {
            case ColumnKind::numeric: d.one_hot_source.push_back(""); break;
            case ColumnKind::categorical:
                has_onehot = true;
                for (std::size_t k = 0; k < c.levels.size(); ++k) d.one_hot_source.push_back(c.name);
                break;
            case ColumnKind::timestamp:
                for (int k = 0; k < 4; ++k) d.one_hot_source.push_back("");
                break;
        }
    }
    if (!has_onehot) d.one_hot_source.clear();
    const bool has_stamp = std::any_of(s.columns.begin(), s.columns.end(),
                                       [](const ColumnSpec& c) { return c.kind == ColumnKind::timestamp; });

    std::vector<double> feats;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        feats.clear();
        bool ok = true;
        double week_hours = 0.0;
        bool first_stamp = true;
        for (std::size_t k = 0; k < s.columns.size() && ok; ++k) {
            const auto& c = s.columns[k];
            const std::string& v = row[col_idx[k]];
            if (v.empty()) {
                ok = false;
                break;
            }
            switch (c.kind) {
                case ColumnKind::numeric: {
                    const auto x = parse_number(v);
                    if (!x) ok = false;
                    else feats.push_back(*x);
                    break;
                }
                case ColumnKind::categorical:
                    for (const auto& l : c.levels) feats.push_back(v == l ? 1.0 : 0.0);
                    break;
                case ColumnKind::timestamp: {
                    const auto ts = parse_timestamp(v);
                    if (!ts) {
                        ok = false;
                        break;
                    }
                    const double wh = ts->week_hours();
                    const auto enc = encode_cyclic(wh);
                    feats.insert(feats.end(), enc.begin(), enc.end());
                    if (first_stamp) week_hours = wh;
                    first_stamp = false;
                    break;
                }
            }
        }
        double y = 0.0;
        if (ok && resp_idx) {
            const auto v = parse_number(row[*resp_idx]);
            if (v) y = *v;
            else if (need_response) ok = false;
        }
        if (!ok) {
            ++r.dropped;
            r.dropped_lines.push_back(t.line_of_row[i]);
            continue;
        }
        d.features.insert(d.features.end(), feats.begin(), feats.end());
        if (resp_idx && need_response) d.response.push_back(y);
        if (has_stamp) d.week_hours.push_back(week_hours);
        ++d.rows;
        r.kept_lines.push_back(t.line_of_row[i]);
    }
    if (d.rows == 0) throw InputError("no usable rows (" + std::to_string(r.dropped) + " dropped)");
    return r;
}

inline IngestResult load_csv(const std::string& path, const SchemaOptions& opt, FeatureSchema* schema_out = nullptr) {
    const CsvTable t = read_csv(path);
    FeatureSchema s = infer_schema(t, opt);
    IngestResult r = encode_table(t, s, !opt.response.empty());
    if (schema_out) *schema_out = std::move(s);
    return r;
}

}  // namespace bgnd
