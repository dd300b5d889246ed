#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "portlab/errors.hpp"

namespace portlab {

/// Calendar date, ISO-8601 `YYYY-MM-DD` on the wire.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    static bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

    static int days_in_month(int y, int m) {
        static constexpr int dm[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        return (m == 2 && leap(y)) ? 29 : dm[m - 1];
    }

    bool valid() const {
        return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
    }

    static std::optional<Date> parse(std::string_view s) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        Date d;
        auto num = [&](int from, int to, int& out) {
            auto [p, ec] = std::from_chars(s.data() + from, s.data() + to, out);
            return ec == std::errc() && p == s.data() + to;
        };
        if (!num(0, 4, d.year) || !num(5, 7, d.month) || !num(8, 10, d.day)) return std::nullopt;
        if (!d.valid()) return std::nullopt;
        return d;
    }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    /// Days since 1970-01-01 (proleptic Gregorian).
    std::int64_t serial() const {
        int y = year;
        const unsigned m = static_cast<unsigned>(month);
        const unsigned d = static_cast<unsigned>(day);
        y -= m <= 2;
        const int era = (y >= 0 ? y : y - 399) / 400;
        const auto yoe = static_cast<unsigned>(y - era * 400);
        const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
    }

    std::int64_t epoch_seconds() const { return serial() * 86400; }

    static Date from_serial(std::int64_t z) {
        z += 719468;
        const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
        const auto doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp + (mp < 10 ? 3 : -9);
        return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
    }

    static Date from_epoch_seconds(std::int64_t secs) {
        std::int64_t days = secs / 86400;
        if (secs < 0 && secs % 86400 != 0) --days;
        return from_serial(days);
    }

    /// Weekday: 0 = Monday .. 6 = Sunday.
    int weekday() const {
        const std::int64_t s = serial();
        return static_cast<int>(((s % 7) + 10) % 7);  // 1970-01-01 was a Thursday
    }

    Date next_day() const { return from_serial(serial() + 1); }

    /// Next Monday-Friday date strictly after this one.
    Date next_business_day() const {
        Date d = next_day();
        while (d.weekday() >= 5) d = d.next_day();
        return d;
    }
};

inline Date parse_date_or_throw(std::string_view s, const std::string& context) {
    auto d = Date::parse(s);
    if (!d) throw ParseError(context + ": bad date '" + std::string(s) + "'");
    return *d;
}

}  // namespace portlab
