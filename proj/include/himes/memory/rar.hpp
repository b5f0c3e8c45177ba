#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "himes/clients/embedder.hpp"

namespace himes::memory {

/// One user session: the queries in the order they were asked. Sessions of a
/// user are chronological in the order they appear in the input.
struct Session {
  std::string user_id;
  std::vector<std::string> queries;
};

struct RarReport {
  double rate = 0.0;
  std::size_t repeated = 0;
  std::size_t total = 0;
};

/// Repeated asking rate: repeated / total, where a query counts as repeated
/// when its cosine similarity to some query the same user asked in an
/// earlier session is at least tau (within 1e-12). A user's first query can
/// never repeat but stays in the denominator. Throws ValidationError unless
/// 0 < tau ≤ 1.
RarReport repeated_asking_rate(std::span<const Session> sessions, clients::EmbedderClient& embedder, double tau = 0.9);

/// JSONL of {user_id, queries: [...]}, one session per line.
std::vector<Session> read_sessions(std::istream& in);

}  // namespace himes::memory
