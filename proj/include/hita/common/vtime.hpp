#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

// Virtual time is a count of milliseconds since 1970-01-01T00:00:00Z. Nothing in
// the twins, stubs or the reference device reads the wall clock.
namespace hita::vtime {

using Millis = std::int64_t;

inline constexpr Millis kSecond = 1000;
inline constexpr Millis kMinute = 60 * kSecond;
inline constexpr Millis kHour = 60 * kMinute;
inline constexpr Millis kDay = 24 * kHour;

// 9999-12-31T23:59:59.999Z; used as "never".
inline constexpr Millis kNever = 253402300799999;

std::int64_t days_from_civil(int y, unsigned m, unsigned d);
void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d);

// "YYYY-MM-DD" or "YYYY-MM-DDTHH:MM[:SS[.mmm]][Z]".
std::optional<Millis> parse_datetime(std::string_view text);
std::optional<Millis> parse_date(std::string_view text);
// "HH:MM" -> minutes after midnight.
std::optional<int> parse_time_of_day(std::string_view text);
// "1500ms", "30s", "30min", "2h", "1d", and sums such as "1h30min".
std::optional<Millis> parse_duration(std::string_view text);

std::string format_datetime(Millis t);
std::string format_date(Millis t);
std::string format_time_of_day(int minutes);
std::string format_duration(Millis d);

inline Millis start_of_day(Millis t) {
    Millis day = t / kDay;
    if (t % kDay < 0) --day;
    return day * kDay;
}

}  // namespace hita::vtime
