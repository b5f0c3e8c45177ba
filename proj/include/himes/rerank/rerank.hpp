#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "himes/clients/embedder.hpp"
#include "himes/core/vector.hpp"
#include "himes/kernels/similarity.hpp"
#include "himes/memory/store.hpp"

namespace himes::rerank {

struct RetrievedDocument {
  std::string doc_id;
  std::string title;
  std::string body;
};

struct DocumentChunk {
  std::string doc_id;
  std::size_t chunk_index = 0;
  std::string title;  // of the parent document, for prompt rendering
  std::string text;
  core::EmbeddingVector embedding;  // empty until embedded
};

struct ScoredChunk {
  DocumentChunk chunk;
  double score = 0.0;
};

/// Sizes are in Unicode code points.
struct ChunkPolicy {
  std::size_t max_chunk_chars = 512;
  std::size_t overlap_chars = 64;

  /// Throws ValidationError unless 0 < max_chunk_chars and overlap_chars < max_chunk_chars.
  void validate() const;
};

/// Splits a body into chunks of at most max_chunk_chars code points.
///
/// A body that fits is one chunk. Otherwise each window [start, start+max)
/// is cut at the last paragraph break inside it (the break stays with the
/// chunk and the next one starts right after it, no overlap), else after the
/// last sentence terminator past start+overlap (next chunk starts overlap
/// characters earlier), else hard at start+max (likewise overlapping).
std::vector<DocumentChunk> chunk_document(const RetrievedDocument& doc, const ChunkPolicy& policy);

/// Mean cosine of the chunk against every historical embedding. Throws
/// ValidationError on an empty history; callers without memory take the
/// pass-through path instead of inventing a score.
double attention_score(const core::EmbeddingVector& chunk, std::span<const core::EmbeddingVector> historical);

struct RerankOptions {
  kernels::Aggregation aggregation = kernels::Aggregation::mean;
  kernels::Execution execution = kernels::Execution::parallel;
};

struct RerankResult {
  std::vector<ScoredChunk> chunks;
  bool no_memory_fallback = false;
  std::size_t candidate_chunks = 0;
};

/// Total order used for golden contents: score desc, doc_id asc, chunk_index asc.
bool golden_order(const ScoredChunk& a, const ScoredChunk& b);

/// Scores already-embedded chunks against the history and keeps the best k.
/// An empty history returns the first k chunks as given, score 0, flagged.
RerankResult rerank_chunks(std::vector<DocumentChunk> chunks, std::span<const core::EmbeddingVector> historical,
                           std::size_t k, const RerankOptions& options = {});

/// Chunks every document, embeds the chunks in one batch and reranks them
/// against the recalled historical queries. With no history the embedder is
/// not called at all. Throws ValidationError when k == 0.
RerankResult rerank_top_k(std::span<const RetrievedDocument> docs, std::span<const memory::MemoryRecord> historical,
                          std::size_t k, const ChunkPolicy& policy, clients::EmbedderClient& embedder,
                          const RerankOptions& options = {});

/// Longest score-ordered prefix whose summed text length fits in max_chars.
/// If not even the first chunk fits, returns that chunk cut to max_chars
/// code points ending in an ellipsis.
std::vector<ScoredChunk> context_budget(std::span<const ScoredChunk> golden, std::size_t max_chars);

inline constexpr std::string_view kEllipsis = "\xE2\x80\xA6";

}  // namespace himes::rerank
