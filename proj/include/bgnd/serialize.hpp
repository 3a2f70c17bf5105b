#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bgnd/ensemble.hpp"
#include "bgnd/error.hpp"
#include "bgnd/json_io.hpp"
#include "bgnd/schema.hpp"

namespace bgnd {

inline constexpr int kModelFileVersion = 1;

inline Json ensemble_to_json(const Ensemble& e) {
    Json stages = Json::array();
    for (const auto& st : e.stages) {
        Json nodes = Json::array();
        for (const auto& n : st.tree.nodes())
            nodes.push_back(Json::array({n.feature, n.threshold, n.left, n.right, n.value}));
        stages.push_back(Json{{"step", st.step}, {"nodes", std::move(nodes)}});
    }
    return Json{{"base", e.base}, {"n_features", e.n_features}, {"stages", std::move(stages)}};
}

inline Ensemble ensemble_from_json(const Json& j) {
    Ensemble e;
    e.base = j.at("base").get<double>();
    e.n_features = j.at("n_features").get<std::size_t>();
    if (!std::isfinite(e.base)) throw InputError("ensemble: non-finite base");
    for (const auto& st : j.at("stages")) {
        std::vector<TreeNode> nodes;
        for (const auto& a : st.at("nodes")) {
            if (!a.is_array() || a.size() != 5) throw InputError("ensemble: tree node must have 5 entries");
            TreeNode n;
            n.feature = a[0].get<int>();
            n.threshold = a[1].get<double>();
            n.left = a[2].get<int>();
            n.right = a[3].get<int>();
            n.value = a[4].get<double>();
            if (n.feature >= static_cast<int>(e.n_features))
                throw InputError("ensemble: split on feature " + std::to_string(n.feature) + " of " +
                                 std::to_string(e.n_features));
            if (!std::isfinite(n.threshold) || !std::isfinite(n.value))
                throw InputError("ensemble: non-finite tree entry");
            nodes.push_back(n);
        }
        e.stages.push_back({st.at("step").get<double>(), Tree(std::move(nodes))});
    }
    return e;
}

inline Json schema_to_json(const FeatureSchema& s, const std::vector<std::string>& feature_names) {
    Json cols = Json::array();
    for (const auto& c : s.columns) {
        Json jc{{"name", c.name}, {"kind", to_string(c.kind)}};
        if (c.kind == ColumnKind::categorical) jc["levels"] = c.levels;
        cols.push_back(std::move(jc));
    }
    return Json{{"response", s.response}, {"columns", std::move(cols)}, {"features", feature_names}};
}

inline FeatureSchema schema_from_json(const Json& j, std::vector<std::string>& feature_names) {
    FeatureSchema s;
    s.response = j.at("response").get<std::string>();
    for (const auto& jc : j.at("columns")) {
        ColumnSpec c{jc.at("name").get<std::string>(), column_kind_from(jc.at("kind").get<std::string>()), {}};
        if (c.kind == ColumnKind::categorical) c.levels = jc.at("levels").get<std::vector<std::string>>();
        s.columns.push_back(std::move(c));
    }
    feature_names = j.at("features").get<std::vector<std::string>>();
    if (!s.columns.empty() && s.feature_names() != feature_names)
        throw InputError("schema: feature list does not match the column definitions");
    return s;
}

/// Opens a model file and checks its version and kind.
inline Json read_model_envelope(const std::string& path, const std::string& expected_kind = "") {
    Json j = read_json_file(path);
    if (!j.is_object() || !j.contains("version")) throw InputError(path + ": not a model file (no version)");
    if (!j["version"].is_number_integer() || j["version"].get<int>() != kModelFileVersion)
        throw InputError(path + ": unsupported model file version " + j["version"].dump() + " (expected " +
                         std::to_string(kModelFileVersion) + ")");
    if (!j.contains("kind") || !j["kind"].is_string()) throw InputError(path + ": model file has no kind");
    if (!expected_kind.empty() && j["kind"] != expected_kind)
        throw InputError(path + ": expected a '" + expected_kind + "' model, found '" +
                         j["kind"].get<std::string>() + "'");
    return j;
}

inline Json report_to_json(const FitReport& r) {
    Json j{{"stop_reason", r.stop_reason},
           {"chosen_depth", r.chosen_depth},
           {"chosen_iters", r.chosen_iters},
           {"cv_folds", r.cv_folds},
           {"train_loss", r.train_loss}};
    if (!r.correlations.empty() || r.nu > 0.0) {
        j["nu"] = r.nu;
        j["psi"] = r.psi;
        j["step_budget"] = r.step_budget;
        j["final_grad_norm"] = r.final_grad_norm;
        j["correlations"] = r.correlations;
        j["depths"] = r.depths;
    }
    if (!r.cv_curve.empty()) j["cv_curve"] = r.cv_curve;
    return j;
}

}  // namespace bgnd
