#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "himes/core/time.hpp"

namespace himes::pipeline {

enum class Role { user, assistant };

std::string_view to_string(Role role) noexcept;
/// Accepts "user" and "assistant" (also "agent" as an alias for assistant).
Role role_from_string(std::string_view s);

struct DialogueTurn {
  Role role = Role::user;
  std::string text;
  core::Timestamp timestamp{};

  friend bool operator==(const DialogueTurn&, const DialogueTurn&) = default;
};

/// Ordered turns with non-empty text and non-decreasing timestamps.
class DialogueHistory {
 public:
  DialogueHistory() = default;
  /// Throws ValidationError listing every offending turn.
  explicit DialogueHistory(std::vector<DialogueTurn> turns);

  /// Throws ValidationError on empty text or a timestamp earlier than the last turn's.
  void push_back(DialogueTurn turn);

  const std::vector<DialogueTurn>& turns() const noexcept { return turns_; }
  bool empty() const noexcept { return turns_.empty(); }
  std::size_t size() const noexcept { return turns_.size(); }

  /// The trailing n turns (all of them when n exceeds the size).
  std::span<const DialogueTurn> last(std::size_t n) const noexcept;

  /// "user: ..." / "assistant: ..." lines; newlines inside a turn become spaces.
  std::string render(std::size_t last_n = static_cast<std::size_t>(-1)) const;

  friend bool operator==(const DialogueHistory&, const DialogueHistory&) = default;

 private:
  std::vector<DialogueTurn> turns_;
};

nlohmann::json to_json(const DialogueHistory& h);
/// Array of {role, text, timestamp?}. Missing timestamps default to the epoch.
DialogueHistory history_from_json(const nlohmann::json& j);

}  // namespace himes::pipeline
