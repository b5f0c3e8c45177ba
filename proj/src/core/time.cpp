#include "himes/core/time.hpp"

#include <charconv>
#include <cstdio>

#include "himes/core/errors.hpp"

namespace himes::core {

using namespace std::chrono;

std::string format_rfc3339(Timestamp ts) {
  const auto day = floor<days>(ts);
  const year_month_day ymd{day};
  const hh_mm_ss tod{ts - day};
  char buf[40];
  const auto ms = tod.subseconds().count();
  if (ms == 0) {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(tod.hours().count()), static_cast<long>(tod.minutes().count()),
                  static_cast<long long>(tod.seconds().count()));
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lld.%03lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(tod.hours().count()), static_cast<long>(tod.minutes().count()),
                  static_cast<long long>(tod.seconds().count()), static_cast<long long>(ms));
  }
  return buf;
}

namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t width) {
  if (pos + width > text.size()) throw ValidationError("truncated timestamp: " + std::string(text));
  int value = 0;
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + width, value);
  if (ec != std::errc{} || ptr != first + width) throw ValidationError("bad timestamp digits: " + std::string(text));
  return value;
}

void expect(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || (text[pos] != c && !(c == 'T' && (text[pos] == 't' || text[pos] == ' '))))
    throw ValidationError("malformed RFC 3339 timestamp: " + std::string(text));
}

}  // namespace

Timestamp parse_rfc3339(std::string_view text) {
  const int y = read_int(text, 0, 4);
  expect(text, 4, '-');
  const int mo = read_int(text, 5, 2);
  expect(text, 7, '-');
  const int d = read_int(text, 8, 2);
  expect(text, 10, 'T');
  const int h = read_int(text, 11, 2);
  expect(text, 13, ':');
  const int mi = read_int(text, 14, 2);
  expect(text, 16, ':');
  const int s = read_int(text, 17, 2);

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw ValidationError("timestamp out of range: " + std::string(text));

  std::size_t pos = 19;
  milliseconds frac{0};
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int digits = 0;
    long long ms = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 3) ms = ms * 10 + (text[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) throw ValidationError("empty fractional seconds: " + std::string(text));
    for (int i = digits; i < 3; ++i) ms *= 10;
    frac = milliseconds{ms};
  }

  minutes offset{0};
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    const int sign = text[pos] == '+' ? 1 : -1;
    const int oh = read_int(text, pos + 1, 2);
    expect(text, pos + 3, ':');
    const int om = read_int(text, pos + 4, 2);
    offset = minutes{sign * (oh * 60 + om)};
    pos += 6;
  } else {
    throw ValidationError("timestamp lacks a UTC offset: " + std::string(text));
  }
  if (pos != text.size()) throw ValidationError("trailing characters in timestamp: " + std::string(text));

  const auto local = sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + frac;
  return time_point_cast<milliseconds>(local - offset);
}

Timestamp now_utc() { return time_point_cast<milliseconds>(system_clock::now()); }

}  // namespace himes::core
