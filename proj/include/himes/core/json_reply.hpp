#pragma once

#include <optional>
#include <string_view>

#include "json.hpp"

namespace himes::core {

/// Pulls the JSON object out of a model reply that may wrap it in prose or
/// code fences. Tries the outermost {...} span first, then each balanced
/// object from the left. Bare Python-style True/False/None outside strings
/// are accepted. Returns nullopt when nothing parses to an object.
std::optional<nlohmann::json> extract_json_object(std::string_view reply);

/// Reads "score: N" (case-insensitive, first occurrence) and clamps N to
/// [0, 100]. Returns nullopt when no integer follows the prefix.
std::optional<int> parse_score_reply(std::string_view reply);

/// Reads a control flag that may arrive as a JSON bool or as the strings
/// "true"/"false" in any case. Returns nullopt for anything else.
std::optional<bool> parse_flag(const nlohmann::json& value);

}  // namespace himes::core
