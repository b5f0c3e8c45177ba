#include "himes/memory/rar.hpp"

#include <istream>
#include <unordered_map>

#include "json.hpp"

#include "himes/core/errors.hpp"

namespace himes::memory {

RarReport repeated_asking_rate(std::span<const Session> sessions, clients::EmbedderClient& embedder, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("RAR threshold tau must lie in (0, 1]");
  constexpr double kSlack = 1e-12;

  // Queries from sessions that have already finished, per user.
  std::unordered_map<std::string, std::vector<core::EmbeddingVector>> prior;
  std::unordered_map<std::string, bool> seen_user;
  RarReport report;

  for (const auto& session : sessions) {
    auto& earlier = prior[session.user_id];
    std::vector<core::EmbeddingVector> current;
    current.reserve(session.queries.size());
    for (const auto& q : session.queries) {
      auto e = embedder.embed(q);
      ++report.total;
      const bool first = !seen_user[session.user_id];
      seen_user[session.user_id] = true;
      if (!first) {
        for (const auto& old : earlier) {
          if (core::cosine_similarity(e, old) + kSlack >= tau) {
            ++report.repeated;
            break;
          }
        }
      }
      current.push_back(std::move(e));
    }
    earlier.insert(earlier.end(), std::make_move_iterator(current.begin()), std::make_move_iterator(current.end()));
  }
  report.rate = report.total == 0 ? 0.0 : static_cast<double>(report.repeated) / static_cast<double>(report.total);
  return report;
}

std::vector<Session> read_sessions(std::istream& in) {
  std::vector<Session> out;
  std::vector<std::string> issues;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Session s{j.at("user_id").get<std::string>(), j.at("queries").get<std::vector<std::string>>()};
      if (s.user_id.empty()) throw ValidationError("empty user_id");
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      issues.push_back("line " + std::to_string(n) + ": " + e.what());
    }
  }
  if (!issues.empty()) throw ValidationError("bad session file", issues);
  return out;
}

}  // namespace himes::memory
