#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "bivwind/errors.hpp"
#include "bivwind/spline_basis.hpp"

namespace bivwind {

using TimePoint = std::chrono::sys_seconds;

/// Parses "YYYY-MM-DDTHH:MM:SSZ" (the trailing Z is optional) or "YYYY-MM-DD".
inline TimePoint parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  const std::string s(text);
  int y = 0;
  unsigned mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
  char tail = '\0';
  int consumed = 0;
  bool ok = false;
  if (s.size() == 10) {
    ok = std::sscanf(s.c_str(), "%4d-%2u-%2u%n", &y, &mo, &d, &consumed) == 3 && consumed == 10;
  } else {
    const int n = std::sscanf(s.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%c%n", &y, &mo, &d, &hh, &mm, &ss, &tail,
                              &consumed);
    ok = (n == 6 && s.size() == 19) || (n == 7 && tail == 'Z' && consumed == static_cast<int>(s.size()));
  }
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ok || !ymd.ok() || hh > 23 || mm > 59 || ss > 59) {
    throw InputError("invalid ISO-8601 timestamp '" + s + "'");
  }
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
}

inline std::string format_iso8601(TimePoint t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

/// Fraction of the calendar year elapsed at t, scaled to [0, 365.25).
///
/// Scaling by the actual year length keeps leap years inside the cyclic
/// day-of-year domain.
inline double day_of_year(TimePoint t) {
  using namespace std::chrono;
  const year_month_day ymd{floor<days>(t)};
  const sys_days start{ymd.year() / January / 1};
  const sys_days next{(ymd.year() + years{1}) / January / 1};
  const double elapsed = duration<double>(t - sys_seconds{start}).count();
  const double length = duration<double>(next - start).count();
  const double doy = kDayOfYearPeriod * elapsed / length;
  return doy >= kDayOfYearPeriod ? 0.0 : doy;
}

}  // namespace bivwind
