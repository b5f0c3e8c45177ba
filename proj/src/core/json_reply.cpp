#include "himes/core/json_reply.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace himes::core {

namespace {

// Rewrites True/False/None tokens that sit outside string literals.
std::string pythonic_to_json(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      out += c;
      if (c == '\\' && i + 1 < s.size()) out += s[++i];
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
      out += c;
      continue;
    }
    auto word = [&](std::string_view w) {
      if (s.substr(i, w.size()) != w) return false;
      const std::size_t end = i + w.size();
      const bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(s[i - 1]));
      const bool right_ok = end >= s.size() || !std::isalnum(static_cast<unsigned char>(s[end]));
      return left_ok && right_ok;
    };
    if (word("True")) { out += "true"; i += 3; continue; }
    if (word("False")) { out += "false"; i += 4; continue; }
    if (word("None")) { out += "null"; i += 3; continue; }
    out += c;
  }
  return out;
}

std::optional<nlohmann::json> try_parse(std::string_view span) {
  for (int pass = 0; pass < 2; ++pass) {
    const std::string text = pass == 0 ? std::string(span) : pythonic_to_json(span);
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (!j.is_discarded() && j.is_object()) return j;
  }
  return std::nullopt;
}

}  // namespace

std::optional<nlohmann::json> extract_json_object(std::string_view reply) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
  if (auto j = try_parse(reply.substr(open, close - open + 1))) return j;

  for (std::size_t start = reply.find('{'); start != std::string_view::npos; start = reply.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < reply.size(); ++i) {
      const char c = reply[i];
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        if (auto j = try_parse(reply.substr(start, i - start + 1))) return j;
        break;
      }
    }
  }
  return std::nullopt;
}

std::optional<int> parse_score_reply(std::string_view reply) {
  std::string lower(reply);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto at = lower.find("score:");
  if (at == std::string::npos) return std::nullopt;
  std::size_t i = at + 6;
  while (i < lower.size() && (lower[i] == ' ' || lower[i] == '\t')) ++i;
  bool negative = false;
  if (i < lower.size() && (lower[i] == '-' || lower[i] == '+')) negative = lower[i++] == '-';
  if (i >= lower.size() || !std::isdigit(static_cast<unsigned char>(lower[i]))) return std::nullopt;
  long value = 0;
  for (; i < lower.size() && std::isdigit(static_cast<unsigned char>(lower[i])); ++i)
    value = std::min<long>(value * 10 + (lower[i] - '0'), 1000);
  if (negative) value = -value;
  return static_cast<int>(std::clamp<long>(value, 0, 100));
}

std::optional<bool> parse_flag(const nlohmann::json& value) {
  if (value.is_boolean()) return value.get<bool>();
  if (value.is_string()) {
    std::string s = value.get<std::string>();
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "true") return true;
    if (s == "false") return false;
  }
  return std::nullopt;
}

}  // namespace himes::core
