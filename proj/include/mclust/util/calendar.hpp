#pragma once

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "mclust/util/error.hpp"

namespace mclust {

using Date = std::chrono::year_month_day;

namespace detail {

inline bool parse_uint(std::string_view text, int& out) {
    if (text.empty()) return false;
    for (char c : text)
        if (c < '0' || c > '9') return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace detail

// Parses YYYY-MM-DD, rejecting impossible days.
inline Date parse_date(std::string_view text) {
    int y = 0, m = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
        !detail::parse_uint(text.substr(0, 4), y) || !detail::parse_uint(text.substr(5, 2), m) ||
        !detail::parse_uint(text.substr(8, 2), d))
        throw InputError("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) throw InputError("invalid calendar day '" + std::string(text) + "'");
    return date;
}

inline std::string format_date(Date date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

// Calendar month, totally ordered. index() counts months since year 0.
struct YearMonth {
    int year = 1970;
    int month = 1;

    static YearMonth from_index(int index) { return {index / 12, index % 12 + 1}; }
    static YearMonth of(Date date) {
        return {static_cast<int>(date.year()), static_cast<int>(static_cast<unsigned>(date.month()))};
    }

    static YearMonth parse(std::string_view text) {
        int y = 0, m = 0;
        if (text.size() != 7 || text[4] != '-' || !detail::parse_uint(text.substr(0, 4), y) ||
            !detail::parse_uint(text.substr(5, 2), m) || m < 1 || m > 12)
            throw InputError("invalid month '" + std::string(text) + "' (expected YYYY-MM)");
        return {y, m};
    }

    int index() const noexcept { return year * 12 + (month - 1); }
    YearMonth plus(int months) const { return from_index(index() + months); }
    bool contains(Date date) const { return of(date) == *this; }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
        return buf;
    }

    friend auto operator<=>(const YearMonth& a, const YearMonth& b) { return a.index() <=> b.index(); }
    friend bool operator==(const YearMonth& a, const YearMonth& b) { return a.index() == b.index(); }
};

// Inclusive month range.
struct MonthRange {
    YearMonth first;
    YearMonth last;

    bool empty() const { return last < first; }
    int size() const { return empty() ? 0 : last.index() - first.index() + 1; }
    bool contains(YearMonth m) const { return !(m < first) && !(last < m); }
    bool contains(Date d) const { return contains(YearMonth::of(d)); }
};

}  // namespace mclust
