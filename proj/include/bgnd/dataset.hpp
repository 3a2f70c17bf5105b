#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bgnd/error.hpp"

namespace bgnd {

/// Dense feature matrix (row-major) with named columns, an optional response
/// and an optional hour-of-week column (Monday 00:00 origin) for
/// time-binned baselines. one_hot_source is either empty or names, per
/// feature, the categorical column it encodes ("" for other features).
struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<std::string> one_hot_source;
    std::size_t rows = 0;
    std::vector<double> features;
    std::vector<double> response;
    std::vector<double> week_hours;

    std::size_t cols() const { return feature_names.size(); }
    bool has_response() const { return !response.empty(); }
    bool has_timestamps() const { return !week_hours.empty(); }

    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * cols(), cols()};
    }
    double at(std::size_t i, std::size_t j) const { return features[i * cols() + j]; }

    void check_shape() const {
        if (features.size() != rows * cols())
            throw InputError("dataset: feature matrix size does not match rows x columns");
        if (has_response() && response.size() != rows)
            throw InputError("dataset: response length does not match row count");
        if (has_timestamps() && week_hours.size() != rows)
            throw InputError("dataset: timestamp column length does not match row count");
        if (!one_hot_source.empty() && one_hot_source.size() != cols())
            throw InputError("dataset: one-hot source tags do not match feature count");
    }

    Dataset subset(std::span<const std::size_t> idx) const {
        Dataset out;
        out.feature_names = feature_names;
        out.one_hot_source = one_hot_source;
        out.rows = idx.size();
        out.features.reserve(idx.size() * cols());
        for (std::size_t i : idx) {
            const auto r = row(i);
            out.features.insert(out.features.end(), r.begin(), r.end());
            if (has_response()) out.response.push_back(response[i]);
            if (has_timestamps()) out.week_hours.push_back(week_hours[i]);
        }
        return out;
    }
};

}  // namespace bgnd
