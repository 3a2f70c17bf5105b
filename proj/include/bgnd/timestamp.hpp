#pragma once

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

namespace bgnd {

/// Wall-clock time as written: a trailing Z or UTC offset is accepted and
/// ignored, since hour-of-day effects follow local time.
struct WallTime {
    std::chrono::sys_days day;
    double seconds = 0.0;  // since local midnight

    /// Hours since the preceding Monday 00:00.
    double week_hours() const {
        const unsigned iso = std::chrono::weekday(day).iso_encoding();  // Monday = 1
        return 24.0 * (iso - 1) + seconds / 3600.0;
    }
};

namespace detail {
inline bool take_int(std::string_view& s, std::size_t digits, int& out) {
    if (s.size() < digits) return false;
    for (std::size_t i = 0; i < digits; ++i)
        if (s[i] < '0' || s[i] > '9') return false;
    std::from_chars(s.data(), s.data() + digits, out);
    s.remove_prefix(digits);
    return true;
}
inline bool take_char(std::string_view& s, char c) {
    if (s.empty() || s.front() != c) return false;
    s.remove_prefix(1);
    return true;
}
}  // namespace detail

/// YYYY-MM-DD, optionally followed by [T or space]HH:MM[:SS[.fff]] and a
/// zone suffix.
inline std::optional<WallTime> parse_timestamp(std::string_view s) {
    using namespace std::chrono;
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    if (!detail::take_int(s, 4, y) || !detail::take_char(s, '-') || !detail::take_int(s, 2, mo) ||
        !detail::take_char(s, '-') || !detail::take_int(s, 2, d))
        return std::nullopt;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    WallTime out{sys_days{ymd}, 0.0};
    if (s.empty()) return out;
    if (!detail::take_char(s, 'T') && !detail::take_char(s, ' ')) return std::nullopt;
    if (!detail::take_int(s, 2, h) || !detail::take_char(s, ':') || !detail::take_int(s, 2, mi)) return std::nullopt;
    double frac = 0.0;
    if (detail::take_char(s, ':')) {
        if (!detail::take_int(s, 2, sec)) return std::nullopt;
        if (detail::take_char(s, '.')) {
            double scale = 0.1;
            std::size_t n = 0;
            while (!s.empty() && s.front() >= '0' && s.front() <= '9') {
                frac += scale * (s.front() - '0');
                scale *= 0.1;
                s.remove_prefix(1);
                ++n;
            }
            if (n == 0) return std::nullopt;
        }
    }
    if (h > 23 || mi > 59 || sec > 59) return std::nullopt;
    if (!s.empty()) {
        int oh = 0, om = 0;
        if (detail::take_char(s, 'Z')) {
        } else if ((detail::take_char(s, '+') || detail::take_char(s, '-')) && detail::take_int(s, 2, oh)) {
            detail::take_char(s, ':');
            if (!detail::take_int(s, 2, om) || oh > 23 || om > 59) return std::nullopt;
        } else {
            return std::nullopt;
        }
        if (!s.empty()) return std::nullopt;
    }
    out.seconds = 3600.0 * h + 60.0 * mi + sec + frac;
    return out;
}

inline std::string format_timestamp(std::chrono::sys_seconds t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss hms{t - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

/// (sin, cos) of the daily phase, then (sin, cos) of the weekly phase.
inline std::array<double, 4> encode_cyclic(double week_hours) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double day_phase = two_pi * std::fmod(week_hours, 24.0) / 24.0;
    const double week_phase = two_pi * week_hours / 168.0;
    return {std::sin(day_phase), std::cos(day_phase), std::sin(week_phase), std::cos(week_phase)};
}

inline constexpr std::size_t kWeekBins = 21;

/// Day-of-week (Monday = 0) times three plus the 8-hour block of the day.
inline std::size_t week_bin(double week_hours) {
    const double h = std::fmod(std::fmod(week_hours, 168.0) + 168.0, 168.0);
    const auto day = static_cast<std::size_t>(h / 24.0);
    const auto block = static_cast<std::size_t>(std::fmod(h, 24.0) / 8.0);
    return std::min<std::size_t>(day, 6) * 3 + std::min<std::size_t>(block, 2);
}

}  // namespace bgnd
