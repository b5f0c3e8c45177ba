#pragma once

#include <string>
#include <string_view>

namespace himes::clients {

/// Black-box text generator: rewriter, responder, judge, classifier or a
/// simulated dialogue participant. Implementations must be safe to share
/// across threads. Transport problems surface as TransportError.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string generate(std::string_view prompt) = 0;
  virtual std::string model_name() const = 0;
};

}  // namespace himes::clients
