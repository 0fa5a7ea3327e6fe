#include "hita/common/vtime.hpp"

#include <cctype>
#include <cstdio>

namespace hita::vtime {

// Howard Hinnant's civil calendar algorithms.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2));
}

namespace {

bool read_digits(std::string_view s, std::size_t& pos, std::size_t count, int& out) {
    if (pos + count > s.size()) return false;
    int v = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const char c = s[pos + i];
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
        v = v * 10 + (c - '0');
    }
    pos += count;
    out = v;
    return true;
}

bool expect(std::string_view s, std::size_t& pos, char c) {
    if (pos >= s.size() || s[pos] != c) return false;
    ++pos;
    return true;
}

unsigned days_in_month(int y, unsigned m) {
    static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    return m == 2 && leap ? 29 : kDays[m - 1];
}

std::optional<Millis> parse_date_prefix(std::string_view s, std::size_t& pos) {
    int y, m, d;
    if (!read_digits(s, pos, 4, y) || !expect(s, pos, '-') || !read_digits(s, pos, 2, m) || !expect(s, pos, '-') ||
        !read_digits(s, pos, 2, d))
        return std::nullopt;
    if (m < 1 || m > 12 || d < 1 || static_cast<unsigned>(d) > days_in_month(y, static_cast<unsigned>(m))) return std::nullopt;
    return days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d)) * kDay;
}

}  // namespace

std::optional<Millis> parse_date(std::string_view text) {
    std::size_t pos = 0;
    auto day = parse_date_prefix(text, pos);
    if (!day || pos != text.size()) return std::nullopt;
    return day;
}

std::optional<Millis> parse_datetime(std::string_view text) {
    std::size_t pos = 0;
    auto day = parse_date_prefix(text, pos);
    if (!day) return std::nullopt;
    if (pos == text.size()) return day;
    if (text[pos] != 'T' && text[pos] != ' ') return std::nullopt;
    ++pos;
    int hh, mm, ss = 0, ms = 0;
    if (!read_digits(text, pos, 2, hh) || !expect(text, pos, ':') || !read_digits(text, pos, 2, mm)) return std::nullopt;
    if (pos < text.size() && text[pos] == ':') {
        ++pos;
        if (!read_digits(text, pos, 2, ss)) return std::nullopt;
        if (pos < text.size() && text[pos] == '.') {
            ++pos;
            if (!read_digits(text, pos, 3, ms)) return std::nullopt;
        }
    }
    if (pos < text.size() && text[pos] == 'Z') ++pos;
    if (pos != text.size() || hh > 23 || mm > 59 || ss > 59) return std::nullopt;
    return *day + hh * kHour + mm * kMinute + ss * kSecond + ms;
}

std::optional<int> parse_time_of_day(std::string_view text) {
    std::size_t pos = 0;
    int hh, mm;
    if (!read_digits(text, pos, 2, hh) || !expect(text, pos, ':') || !read_digits(text, pos, 2, mm)) return std::nullopt;
    if (pos != text.size() || hh > 23 || mm > 59) return std::nullopt;
    return hh * 60 + mm;
}

std::optional<Millis> parse_duration(std::string_view text) {
    if (text.empty()) return std::nullopt;
    Millis total = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (!std::isdigit(static_cast<unsigned char>(text[pos]))) return std::nullopt;
        Millis n = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            n = n * 10 + (text[pos] - '0');
            if (n > kNever) return std::nullopt;
            ++pos;
        }
        std::size_t end = pos;
        while (end < text.size() && std::isalpha(static_cast<unsigned char>(text[end]))) ++end;
        const std::string_view unit = text.substr(pos, end - pos);
        Millis scale;
        if (unit == "ms") scale = 1;
        else if (unit == "s") scale = kSecond;
        else if (unit == "min") scale = kMinute;
        else if (unit == "h") scale = kHour;
        else if (unit == "d") scale = kDay;
        else return std::nullopt;
        total += n * scale;
        pos = end;
    }
    return total;
}

std::string format_date(Millis t) {
    int y;
    unsigned m, d;
    civil_from_days(start_of_day(t) / kDay, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
    return buf;
}

std::string format_datetime(Millis t) {
    const Millis day = start_of_day(t);
    const Millis rem = t - day;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d.%03dZ", format_date(t).c_str(), static_cast<int>(rem / kHour),
                  static_cast<int>(rem % kHour / kMinute), static_cast<int>(rem % kMinute / kSecond),
                  static_cast<int>(rem % kSecond));
    return buf;
}

std::string format_time_of_day(int minutes) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%02d:%02d", minutes / 60, minutes % 60);
    return buf;
}

std::string format_duration(Millis d) {
    if (d == 0) return "0ms";
    std::string out;
    if (d < 0) return std::to_string(d) + "ms";
    const struct {
        Millis scale;
        const char* unit;
    } units[] = {{kDay, "d"}, {kHour, "h"}, {kMinute, "min"}, {kSecond, "s"}, {1, "ms"}};
    for (const auto& u : units) {
        if (d >= u.scale) {
            out += std::to_string(d / u.scale) + u.unit;
            d %= u.scale;
        }
    }
    return out;
}

}  // namespace hita::vtime
