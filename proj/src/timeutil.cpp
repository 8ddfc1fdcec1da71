#include "mtt/timeutil.hpp"

#include <cstdio>

#include "mtt/errors.hpp"

namespace mtt {

int64_t days_from_civil(int y, int m, int d) {
    // Howard Hinnant's civil-from-days inverse, public domain algorithm.
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);             // [0, 399]
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;  // [0, 365]
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;            // [0, 146096]
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

CivilDate civil_from_days(int64_t z) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t y = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

namespace {

bool parse_int_field(const std::string& s, size_t pos, size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        v = v * 10 + (s[i] - '0');
    }
    out = v;
    return true;
}

}  // namespace

int64_t parse_date(const std::string& s) {
    int y, m, d;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !parse_int_field(s, 0, 4, y) ||
        !parse_int_field(s, 5, 2, m) || !parse_int_field(s, 8, 2, d) || m < 1 || m > 12 ||
        d < 1 || d > 31) {
        throw ValidationError("invalid date '" + s + "' (expected YYYY-MM-DD)");
    }
    return days_from_civil(y, m, d) * kSecondsPerDay;
}

int64_t parse_timestamp(const std::string& s) {
    if (s.size() == 10) return parse_date(s);
    int hh, mm, ss;
    if (s.size() != 20 || s[10] != 'T' || s[13] != ':' || s[16] != ':' || s[19] != 'Z' ||
        !parse_int_field(s, 11, 2, hh) || !parse_int_field(s, 14, 2, mm) ||
        !parse_int_field(s, 17, 2, ss) || hh > 23 || mm > 59 || ss > 59) {
        throw ValidationError("invalid timestamp '" + s + "' (expected YYYY-MM-DDTHH:MM:SSZ)");
    }
    return parse_date(s.substr(0, 10)) + hh * kSecondsPerHour + mm * kSecondsPerMinute + ss;
}

std::string format_date(int64_t ts) {
    int64_t days = ts / kSecondsPerDay;
    if (ts < 0 && ts % kSecondsPerDay != 0) --days;
    const CivilDate c = civil_from_days(days);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", c.year, c.month, c.day);
    return buf;
}

std::string format_timestamp(int64_t ts) {
    int64_t days = ts / kSecondsPerDay;
    if (ts < 0 && ts % kSecondsPerDay != 0) --days;
    const int64_t sod = ts - days * kSecondsPerDay;
    const CivilDate c = civil_from_days(days);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02lld:%02lld:%02lldZ", c.year, c.month,
                  c.day, static_cast<long long>(sod / kSecondsPerHour),
                  static_cast<long long>((sod / kSecondsPerMinute) % 60),
                  static_cast<long long>(sod % 60));
    return buf;
}

}  // namespace mtt
