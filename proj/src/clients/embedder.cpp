#include "himes/clients/embedder.hpp"

namespace himes::clients {

std::vector<core::EmbeddingVector> EmbedderClient::embed_batch(std::span<const std::string> texts) {
  std::vector<core::EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

}  // namespace himes::clients
