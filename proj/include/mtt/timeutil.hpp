#pragma once

#include <cstdint>
#include <string>

namespace mtt {

// All times are UTC, represented as seconds since the Unix epoch.
// Dates are represented as the epoch second of their midnight.

inline constexpr int64_t kSecondsPerMinute = 60;
inline constexpr int64_t kSecondsPerHour = 3600;
inline constexpr int64_t kSecondsPerDay = 86400;
inline constexpr int64_t kSecondsPerWeek = 7 * kSecondsPerDay;

struct CivilDate {
    int year;
    int month;  // 1..12
    int day;    // 1..31
};

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
int64_t days_from_civil(int year, int month, int day);
CivilDate civil_from_days(int64_t days);

// "YYYY-MM-DD" -> midnight epoch seconds. Throws ValidationError on bad input.
int64_t parse_date(const std::string& s);

// "YYYY-MM-DDTHH:MM:SSZ" -> epoch seconds. A bare date is accepted as midnight.
int64_t parse_timestamp(const std::string& s);

std::string format_date(int64_t ts);
std::string format_timestamp(int64_t ts);

}  // namespace mtt
