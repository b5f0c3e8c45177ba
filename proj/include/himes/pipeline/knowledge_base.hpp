#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "himes/clients/embedder.hpp"
#include "himes/kernels/matrix.hpp"
#include "himes/kernels/similarity.hpp"
#include "himes/rerank/rerank.hpp"

namespace himes::pipeline {

struct RetrievalHit {
  std::size_t index;  // position in the knowledge base
  double similarity;
};

/// Documents plus one whole-body embedding each, fixed at load time.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  /// Embeds every body in one batch. Throws ValidationError on duplicate
  /// doc ids or empty bodies, listing them all.
  KnowledgeBase(std::vector<rerank::RetrievedDocument> docs, clients::EmbedderClient& embedder);

  /// JSONL of {doc_id, title, body}. With a cache path, vectors whose
  /// embedder identity and body hash match are reused, the rest are embedded
  /// and the cache is rewritten.
  static KnowledgeBase load_jsonl(const std::filesystem::path& path, clients::EmbedderClient& embedder,
                                  std::optional<std::filesystem::path> cache = std::nullopt);
  static std::vector<rerank::RetrievedDocument> parse_jsonl(std::istream& in);

  const std::vector<rerank::RetrievedDocument>& documents() const noexcept { return docs_; }
  const kernels::EmbeddingMatrix& embeddings() const noexcept { return embeddings_; }
  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }
  const std::string& embedder_identity() const noexcept { return identity_; }

  /// Number of bodies the last load had to embed (cache misses).
  std::size_t embedded_on_load() const noexcept { return embedded_on_load_; }

  /// Best top_r documents for the query embedding: similarity descending,
  /// ties in knowledge-base order. Empty knowledge base → empty result.
  std::vector<RetrievalHit> search(const core::EmbeddingVector& query, std::size_t top_r,
                                   kernels::Execution exec = kernels::Execution::parallel) const;

 private:
  static void validate(const std::vector<rerank::RetrievedDocument>& docs);

  std::vector<rerank::RetrievedDocument> docs_;
  kernels::EmbeddingMatrix embeddings_;
  std::string identity_;
  std::size_t embedded_on_load_ = 0;
};

/// Embeds the query and returns the best top_r documents.
std::vector<rerank::RetrievedDocument> retrieve(std::string_view query, const KnowledgeBase& kb, std::size_t top_r,
                                                clients::EmbedderClient& embedder);

}  // namespace himes::pipeline
