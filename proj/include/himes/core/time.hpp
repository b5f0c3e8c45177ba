#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace himes::core {

/// UTC instant with millisecond resolution.
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// RFC 3339 in UTC ("2024-05-01T08:30:00Z"); milliseconds are emitted only when non-zero.
std::string format_rfc3339(Timestamp ts);

/// Accepts "Z" or numeric offsets and an optional fractional second. Throws ValidationError.
Timestamp parse_rfc3339(std::string_view text);

Timestamp now_utc();

}  // namespace himes::core
