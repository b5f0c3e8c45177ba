#include "himes/pipeline/knowledge_base.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include "json.hpp"

#include "himes/core/errors.hpp"
#include "himes/core/hash.hpp"

namespace himes::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

void KnowledgeBase::validate(const std::vector<rerank::RetrievedDocument>& docs) {
  std::vector<std::string> issues;
  std::set<std::string> seen;
  for (const auto& d : docs) {
    if (d.doc_id.empty()) issues.push_back("document with empty doc_id");
    else if (!seen.insert(d.doc_id).second) issues.push_back("duplicate doc_id '" + d.doc_id + "'");
    if (d.body.empty()) issues.push_back("document '" + d.doc_id + "' has an empty body");
  }
  if (!issues.empty()) throw ValidationError("invalid knowledge base", std::move(issues));
}

KnowledgeBase::KnowledgeBase(std::vector<rerank::RetrievedDocument> docs, clients::EmbedderClient& embedder)
    : embeddings_(embedder.dimension()), identity_(embedder.identity()) {
  validate(docs);
  std::vector<std::string> bodies;
  bodies.reserve(docs.size());
  for (const auto& d : docs) bodies.push_back(d.body);
  const auto vectors = docs.empty() ? std::vector<core::EmbeddingVector>{} : embedder.embed_batch(bodies);
  if (vectors.size() != docs.size()) throw TransportError("embedder returned the wrong number of vectors", false);
  embeddings_.reserve(docs.size());
  for (const auto& v : vectors) embeddings_.push_back(v);
  embedded_on_load_ = docs.size();
  docs_ = std::move(docs);
}

std::vector<rerank::RetrievedDocument> KnowledgeBase::parse_jsonl(std::istream& in) {
  std::vector<rerank::RetrievedDocument> docs;
  std::vector<std::string> issues;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      rerank::RetrievedDocument d;
      d.doc_id = j.at("doc_id").is_string() ? j.at("doc_id").get<std::string>() : j.at("doc_id").dump();
      d.title = j.value("title", std::string{});
      d.body = j.at("body").get<std::string>();
      docs.push_back(std::move(d));
    } catch (const json::exception& e) {
      issues.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!issues.empty()) throw ValidationError("invalid knowledge base file", std::move(issues));
  return docs;
}

KnowledgeBase KnowledgeBase::load_jsonl(const fs::path& path, clients::EmbedderClient& embedder,
                                        std::optional<fs::path> cache) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read knowledge base " + path.string());
  auto docs = parse_jsonl(in);
  validate(docs);

  const std::string identity = embedder.identity();
  std::unordered_map<std::string, std::vector<double>> cached;  // key: body hash
  if (cache && fs::exists(*cache)) {
    try {
      std::ifstream cin(*cache);
      const auto j = json::parse(cin);
      if (j.value("embedder", std::string{}) == identity)
        for (const auto& e : j.at("entries")) cached[e.at("hash").get<std::string>()] = e.at("vector").get<std::vector<double>>();
    } catch (const json::exception&) {
      cached.clear();  // a damaged cache is rebuilt, never trusted
    }
  }

  KnowledgeBase kb;
  kb.identity_ = identity;
  kb.embeddings_ = kernels::EmbeddingMatrix(embedder.dimension());
  std::vector<std::string> hashes;
  std::vector<std::optional<core::EmbeddingVector>> vectors(docs.size());
  std::vector<std::string> missing_bodies;
  std::vector<std::size_t> missing_index;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    hashes.push_back(core::hex64(core::fnv1a64(docs[i].body)));
    auto it = cached.find(hashes.back());
    if (it != cached.end() && it->second.size() == embedder.dimension()) {
      vectors[i] = core::EmbeddingVector(it->second);
    } else {
      missing_bodies.push_back(docs[i].body);
      missing_index.push_back(i);
    }
  }
  if (!missing_bodies.empty()) {
    auto fresh = embedder.embed_batch(missing_bodies);
    if (fresh.size() != missing_bodies.size()) throw TransportError("embedder returned the wrong number of vectors", false);
    for (std::size_t m = 0; m < fresh.size(); ++m) vectors[missing_index[m]] = std::move(fresh[m]);
  }
  for (const auto& v : vectors) kb.embeddings_.push_back(*v);
  kb.embedded_on_load_ = missing_bodies.size();

  if (cache && (!missing_bodies.empty() || !fs::exists(*cache))) {
    json entries = json::array();
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const auto values = vectors[i]->values();
      entries.push_back({{"doc_id", docs[i].doc_id}, {"hash", hashes[i]},
                         {"vector", std::vector<double>(values.begin(), values.end())}});
    }
    const fs::path tmp = cache->string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << json{{"embedder", identity}, {"entries", entries}}.dump() << '\n';
      if (!out) throw StoreUnavailableError("cannot write embedding cache " + tmp.string());
    }
    fs::rename(tmp, *cache);
  }
  kb.docs_ = std::move(docs);
  return kb;
}

std::vector<RetrievalHit> KnowledgeBase::search(const core::EmbeddingVector& query, std::size_t top_r,
                                                kernels::Execution exec) const {
  if (docs_.empty() || top_r == 0) return {};
  std::vector<double> sims(docs_.size());
  kernels::cosine_scan(exec, query, embeddings_, sims);
  std::vector<std::size_t> order(docs_.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t keep = std::min(top_r, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) { return sims[a] != sims[b] ? sims[a] > sims[b] : a < b; });
  std::vector<RetrievalHit> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back({order[i], sims[order[i]]});
  return out;
}

std::vector<rerank::RetrievedDocument> retrieve(std::string_view query, const KnowledgeBase& kb, std::size_t top_r,
                                                clients::EmbedderClient& embedder) {
  if (kb.empty()) return {};
  std::vector<rerank::RetrievedDocument> out;
  for (const auto& h : kb.search(embedder.embed(query), top_r)) out.push_back(kb.documents()[h.index]);
  return out;
}

}  // namespace himes::pipeline
