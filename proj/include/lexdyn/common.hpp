#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lexdyn {

// Error taxonomy mirrored by the CLI exit codes.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

class missing_artifact_error : public std::runtime_error {
public:
    explicit missing_artifact_error(const std::string& what) : std::runtime_error(what) {}
};

class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// Linear-interpolation quantile over an already sorted range, q in [0,1].
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty range");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile_of(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, q);
}

// Howard Hinnant's civil-date algorithms; UTC only, no locale involvement.
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) noexcept {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
    int year;
    unsigned month;
    unsigned day;
};

constexpr CivilDate civil_from_days(std::int64_t z) noexcept {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {static_cast<int>(y + (m <= 2)), m, d};
}

// A half-open calendar window of T whole UTC months starting at (year, month).
struct MonthWindow {
    int start_year = 1970;
    unsigned start_month = 1;  // 1..12
    int months = 0;            // T

    // 1-based month index for a Unix timestamp, or nullopt outside the window.
    std::optional<int> index_of(std::int64_t utc_seconds) const {
        std::int64_t days = utc_seconds / 86400;
        if (utc_seconds < 0 && utc_seconds % 86400 != 0) --days;
        const CivilDate c = civil_from_days(days);
        const int idx = (c.year - start_year) * 12 +
                        (static_cast<int>(c.month) - static_cast<int>(start_month)) + 1;
        if (idx < 1 || idx > months) return std::nullopt;
        return idx;
    }

    // Unix timestamp of the start of 1-based month index m.
    std::int64_t month_start_utc(int m) const {
        const int total = (start_year * 12 + static_cast<int>(start_month) - 1) + (m - 1);
        const int y = total / 12;
        const unsigned mo = static_cast<unsigned>(total % 12) + 1;
        return days_from_civil(y, mo, 1) * 86400;
    }
};

// Parses "YYYY-MM"; throws config_error otherwise.
inline std::pair<int, unsigned> parse_year_month(const std::string& s) {
    if (s.size() != 7 || s[4] != '-') throw config_error("bad month literal (want YYYY-MM): " + s);
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u})
        if (s[i] < '0' || s[i] > '9') throw config_error("bad month literal (want YYYY-MM): " + s);
    const int y = std::stoi(s.substr(0, 4));
    const int m = std::stoi(s.substr(5, 2));
    if (m < 1 || m > 12) throw config_error("month out of range in: " + s);
    return {y, static_cast<unsigned>(m)};
}

}  // namespace lexdyn
