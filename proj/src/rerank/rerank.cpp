#include "himes/rerank/rerank.hpp"

#include <algorithm>

#include "himes/core/errors.hpp"
#include "himes/core/text.hpp"
#include "himes/kernels/matrix.hpp"

namespace himes::rerank {

namespace {

bool is_sentence_end(std::string_view cp) {
  return cp == "." || cp == "!" || cp == "?" || cp == "\xE3\x80\x82" || cp == "\xEF\xBC\x81" || cp == "\xEF\xBC\x9F";
}

}  // namespace

void ChunkPolicy::validate() const {
  if (max_chunk_chars == 0) throw ValidationError("max_chunk_chars must be positive");
  if (overlap_chars >= max_chunk_chars) throw ValidationError("overlap_chars must be smaller than max_chunk_chars");
}

std::vector<DocumentChunk> chunk_document(const RetrievedDocument& doc, const ChunkPolicy& policy) {
  policy.validate();
  const auto bounds = core::utf8_boundaries(doc.body);  // bounds[i] = byte offset of code point i
  const std::size_t n = bounds.size() - 1;
  auto cp = [&](std::size_t i) { return std::string_view(doc.body).substr(bounds[i], bounds[i + 1] - bounds[i]); };
  auto slice = [&](std::size_t a, std::size_t b) { return doc.body.substr(bounds[a], bounds[b] - bounds[a]); };

  std::vector<DocumentChunk> out;
  auto emit = [&](std::size_t a, std::size_t b) {
    out.push_back(DocumentChunk{doc.doc_id, out.size(), doc.title, slice(a, b), {}});
  };

  const std::size_t max = policy.max_chunk_chars;
  const std::size_t overlap = policy.overlap_chars;
  std::size_t start = 0;
  while (n - start > max) {
    const std::size_t limit = start + max;

    // Last "\n\n"-style run ending inside the window.
    std::size_t para_end = 0;
    for (std::size_t i = limit; i > start + 1; --i) {
      if (cp(i - 1) == "\n" && cp(i - 2) == "\n") {
        para_end = i;
        break;
      }
    }
    if (para_end > start) {
      // Swallow the rest of the newline run when it also fits.
      std::size_t end = para_end;
      while (end < limit && cp(end) == "\n") ++end;
      emit(start, end);
      start = end;
      continue;
    }

    std::size_t sentence_end = 0;
    for (std::size_t i = limit; i > start + overlap; --i) {
      if (is_sentence_end(cp(i - 1))) {
        sentence_end = i;
        break;
      }
    }
    const std::size_t end = sentence_end != 0 ? sentence_end : limit;
    emit(start, end);
    start = end - overlap;
  }
  emit(start, n);
  return out;
}

double attention_score(const core::EmbeddingVector& chunk, std::span<const core::EmbeddingVector> historical) {
  if (historical.empty()) throw ValidationError("attention_score needs at least one historical embedding");
  kernels::EmbeddingMatrix chunks(chunk.dimension()), history(historical.front().dimension());
  chunks.push_back(chunk);
  for (const auto& h : historical) history.push_back(h);
  double out = 0.0;
  kernels::history_affinity(kernels::Execution::serial, chunks, history, kernels::Aggregation::mean, {&out, 1});
  return out;
}

bool golden_order(const ScoredChunk& a, const ScoredChunk& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.chunk.doc_id != b.chunk.doc_id) return a.chunk.doc_id < b.chunk.doc_id;
  return a.chunk.chunk_index < b.chunk.chunk_index;
}

RerankResult rerank_chunks(std::vector<DocumentChunk> chunks, std::span<const core::EmbeddingVector> historical,
                           std::size_t k, const RerankOptions& options) {
  if (k == 0) throw ValidationError("k must be at least 1");
  RerankResult result;
  result.candidate_chunks = chunks.size();
  if (historical.empty()) {
    result.no_memory_fallback = true;
    const std::size_t keep = std::min(k, chunks.size());
    for (std::size_t i = 0; i < keep; ++i) result.chunks.push_back(ScoredChunk{std::move(chunks[i]), 0.0});
    return result;
  }
  if (chunks.empty()) return result;

  kernels::EmbeddingMatrix chunk_rows(chunks.front().embedding.dimension());
  chunk_rows.reserve(chunks.size());
  for (const auto& c : chunks) chunk_rows.push_back(c.embedding);
  kernels::EmbeddingMatrix history(historical.front().dimension());
  history.reserve(historical.size());
  for (const auto& h : historical) history.push_back(h);

  std::vector<double> scores(chunks.size());
  kernels::history_affinity(options.execution, chunk_rows, history, options.aggregation, scores);

  result.chunks.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) result.chunks.push_back(ScoredChunk{std::move(chunks[i]), scores[i]});
  const std::size_t keep = std::min(k, result.chunks.size());
  std::partial_sort(result.chunks.begin(), result.chunks.begin() + static_cast<std::ptrdiff_t>(keep),
                    result.chunks.end(), golden_order);
  result.chunks.resize(keep);
  return result;
}

RerankResult rerank_top_k(std::span<const RetrievedDocument> docs, std::span<const memory::MemoryRecord> historical,
                          std::size_t k, const ChunkPolicy& policy, clients::EmbedderClient& embedder,
                          const RerankOptions& options) {
  if (k == 0) throw ValidationError("k must be at least 1");
  policy.validate();
  std::vector<DocumentChunk> chunks;
  for (const auto& d : docs) {
    auto part = chunk_document(d, policy);
    std::move(part.begin(), part.end(), std::back_inserter(chunks));
  }
  std::vector<core::EmbeddingVector> history;
  history.reserve(historical.size());
  for (const auto& r : historical) history.push_back(r.embedding);

  if (!history.empty() && !chunks.empty()) {
    std::vector<std::string> texts;
    texts.reserve(chunks.size());
    for (const auto& c : chunks) texts.push_back(c.text);
    auto vectors = embedder.embed_batch(texts);
    if (vectors.size() != chunks.size()) throw TransportError("embedder returned the wrong number of vectors", false);
    for (std::size_t i = 0; i < chunks.size(); ++i) chunks[i].embedding = std::move(vectors[i]);
  }
  return rerank_chunks(std::move(chunks), history, k, options);
}

std::vector<ScoredChunk> context_budget(std::span<const ScoredChunk> golden, std::size_t max_chars) {
  if (max_chars == 0) throw ValidationError("max_chars must be positive");
  std::vector<ScoredChunk> out;
  std::size_t used = 0;
  for (const auto& c : golden) {
    const std::size_t len = core::utf8_length(c.chunk.text);
    if (used + len > max_chars) break;
    used += len;
    out.push_back(c);
  }
  if (out.empty() && !golden.empty()) {
    ScoredChunk top = golden.front();
    const auto bounds = core::utf8_boundaries(top.chunk.text);
    top.chunk.text = top.chunk.text.substr(0, bounds[max_chars - 1]);
    top.chunk.text += kEllipsis;
    out.push_back(std::move(top));
  }
  return out;
}

}  // namespace himes::rerank
