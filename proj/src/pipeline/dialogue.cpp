#include "himes/pipeline/dialogue.hpp"

#include <algorithm>

#include "himes/core/errors.hpp"
#include "himes/core/text.hpp"

namespace himes::pipeline {

std::string_view to_string(Role role) noexcept { return role == Role::user ? "user" : "assistant"; }

Role role_from_string(std::string_view s) {
  if (s == "user") return Role::user;
  if (s == "assistant" || s == "agent") return Role::assistant;
  throw ValidationError("unknown dialogue role '" + std::string(s) + "'");
}

DialogueHistory::DialogueHistory(std::vector<DialogueTurn> turns) {
  std::vector<std::string> issues;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (core::normalize_text(turns[i].text).empty()) issues.push_back("turn " + std::to_string(i) + " has empty text");
    if (i > 0 && turns[i].timestamp < turns[i - 1].timestamp)
      issues.push_back("turn " + std::to_string(i) + " is earlier than the turn before it");
  }
  if (!issues.empty()) throw ValidationError("invalid dialogue history", std::move(issues));
  turns_ = std::move(turns);
}

void DialogueHistory::push_back(DialogueTurn turn) {
  if (core::normalize_text(turn.text).empty()) throw ValidationError("dialogue turn text must be non-empty");
  if (!turns_.empty() && turn.timestamp < turns_.back().timestamp)
    throw ValidationError("dialogue turns must be in chronological order");
  turns_.push_back(std::move(turn));
}

std::span<const DialogueTurn> DialogueHistory::last(std::size_t n) const noexcept {
  const std::size_t k = std::min(n, turns_.size());
  return std::span<const DialogueTurn>(turns_).subspan(turns_.size() - k);
}

std::string DialogueHistory::render(std::size_t last_n) const {
  std::string out;
  for (const auto& t : last(last_n)) {
    if (!out.empty()) out += '\n';
    out += to_string(t.role);
    out += ": ";
    std::string text = t.text;
    std::replace(text.begin(), text.end(), '\n', ' ');
    std::replace(text.begin(), text.end(), '\r', ' ');
    out += text;
  }
  return out;
}

nlohmann::json to_json(const DialogueHistory& h) {
  auto arr = nlohmann::json::array();
  for (const auto& t : h.turns())
    arr.push_back({{"role", to_string(t.role)}, {"text", t.text}, {"timestamp", core::format_rfc3339(t.timestamp)}});
  return arr;
}

DialogueHistory history_from_json(const nlohmann::json& j) {
  if (j.is_null()) return {};
  if (!j.is_array()) throw ValidationError("history must be an array of turns");
  std::vector<DialogueTurn> turns;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("role") || !item.contains("text") || !item["role"].is_string() ||
        !item["text"].is_string())
      throw ValidationError("each history turn needs string fields role and text");
    DialogueTurn t;
    t.role = role_from_string(item["role"].get<std::string>());
    t.text = item["text"].get<std::string>();
    if (auto it = item.find("timestamp"); it != item.end() && it->is_string())
      t.timestamp = core::parse_rfc3339(it->get<std::string>());
    turns.push_back(std::move(t));
  }
  return DialogueHistory(std::move(turns));
}

}  // namespace himes::pipeline
