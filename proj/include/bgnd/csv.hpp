#pragma once

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bgnd/error.hpp"

namespace bgnd {

/// Comma-separated, double-quoted fields ("" escapes a quote), LF or CRLF.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_of_row;  // 1-based source line, for messages

    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return j;
        return std::nullopt;
    }
};

inline CsvTable parse_csv(std::string_view text) {
    CsvTable t;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false, field_started = false, any = false;
    std::size_t line = 1, record_line = 1;

    const auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    const auto end_record = [&] {
        end_field();
        const bool blank = record.size() == 1 && record[0].empty();
        if (!blank) {
            if (t.header.empty()) {
                t.header = std::move(record);
            } else {
                if (record.size() != t.header.size())
                    throw InputError("csv line " + std::to_string(record_line) + ": expected " +
                                     std::to_string(t.header.size()) + " fields, got " +
                                     std::to_string(record.size()));
                t.rows.push_back(std::move(record));
                t.line_of_row.push_back(record_line);
            }
        }
        record.clear();
        any = false;
    };

    std::size_t i = 0;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;  // UTF-8 BOM
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (!any) {
            record_line = line;
            any = true;
        }
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started && !field.empty())
                    throw InputError("csv line " + std::to_string(line) + ": quote inside unquoted field");
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') break;
                field += c;
                break;
            case '\n':
                end_record();
                ++line;
                break;
            default:
                field += c;
                field_started = true;
        }
    }
    if (in_quotes) throw InputError("csv: unterminated quoted field starting near line " + std::to_string(record_line));
    if (any) end_record();
    if (t.header.empty()) throw InputError("csv: no header row");
    return t;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline CsvTable read_csv(const std::string& path) {
    try {
        return parse_csv(read_file(path));
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

/// Strict decimal parse: the whole field must be a finite number.
inline std::optional<double> parse_number(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    const std::string buf(s);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw InputError("cannot write '" + path + "'");
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t j = 0; j < fields.size(); ++j) {
            if (j) out_ << ',';
            out_ << csv_escape(fields[j]);
        }
        out_ << '\n';
        if (!out_) throw InputError("write failed for '" + path_ + "'");
    }

private:
    std::string path_;
    std::ofstream out_;
};

}  // namespace bgnd
