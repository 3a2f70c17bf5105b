#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "bgnd/csv.hpp"
#include "bgnd/error.hpp"
#include "json.hpp"

namespace bgnd {

using Json = nlohmann::ordered_json;

namespace detail {

inline bool is_scalar(const Json& j) { return !j.is_object() && !j.is_array(); }

inline void write_json(const Json& j, std::ostream& out, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    switch (j.type()) {
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            if (!std::isfinite(v)) throw NumericalError("json: cannot write non-finite number");
            std::string s = format_double(v);
            // keep a float marker so integral values read back as floats
            if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
            out << s;
            return;
        }
        case Json::value_t::object: {
            if (j.empty()) {
                out << "{}";
                return;
            }
            out << "{\n";
            bool first = true;
            for (const auto& [k, v] : j.items()) {
                if (!first) out << ",\n";
                first = false;
                out << inner << Json(k).dump() << ": ";
                write_json(v, out, indent + 1);
            }
            out << "\n" << pad << "}";
            return;
        }
        case Json::value_t::array: {
            bool flat = true;
            for (const auto& v : j) flat = flat && is_scalar(v);
            out << "[";
            bool first = true;
            for (const auto& v : j) {
                if (!first) out << (flat ? ", " : ",");
                first = false;
                if (!flat) out << "\n" << inner;
                write_json(v, out, indent + 1);
            }
            if (!flat && !j.empty()) out << "\n" << pad;
            out << "]";
            return;
        }
        default:
            out << j.dump();
    }
}

}  // namespace detail

/// Doubles are written in shortest round-trip form so files reload
/// bit-exactly.
inline std::string to_json_text(const Json& j) {
    std::ostringstream out;
    detail::write_json(j, out, 0);
    out << '\n';
    return out.str();
}

inline void write_json_file(const Json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << to_json_text(j);
    if (!out) throw InputError("write failed for '" + path + "'");
}

inline Json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw InputError(what + ": malformed JSON at byte " + std::to_string(e.byte) + " (" + e.what() + ")");
    }
}

inline Json read_json_file(const std::string& path) { return parse_json_text(read_file(path), path); }

}  // namespace bgnd
