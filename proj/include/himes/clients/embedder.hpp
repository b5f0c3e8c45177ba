#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "himes/core/vector.hpp"

namespace himes::clients {

/// Maps text to a unit-norm embedding of fixed dimension. Must be safe to
/// share across threads.
class EmbedderClient {
 public:
  virtual ~EmbedderClient() = default;

  virtual core::EmbeddingVector embed(std::string_view text) = 0;

  /// Default implementation embeds one text at a time.
  virtual std::vector<core::EmbeddingVector> embed_batch(std::span<const std::string> texts);

  virtual std::size_t dimension() const = 0;

  /// Stable identity (model + parameters); keys the knowledge-base embedding cache.
  virtual std::string identity() const = 0;
};

}  // namespace himes::clients
