#pragma once

#include <map>
#include <string>
#include <string_view>

#include "himes/core/errors.hpp"

namespace himes::pipeline {

/// A template slot without a value.
class TemplateError : public ValidationError {
 public:
  explicit TemplateError(std::string slot)
      : ValidationError("unresolved template slot {{" + slot + "}}"), slot_(std::move(slot)) {}
  const std::string& slot() const noexcept { return slot_; }

 private:
  std::string slot_;
};

/// Replaces every {{name}} with slots.at(name) in a single pass (values are
/// never re-scanned). Single braces are literal text. Throws TemplateError
/// naming the first slot that has no value.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& slots);

namespace templates {

/// Query rewriter. Slots: query_old, history, biz_id, agent.
extern const std::string_view kRewriter;
/// Black-box responder. Slots: meta_prompt, comments, knowledge_base, query.
extern const std::string_view kResponder;
/// Simulated user for dialogue generation. Slots: user_role, user_question,
/// dialogue_history, task_name, task_description, task_examples.
extern const std::string_view kDatagenUser;
/// Simulated account author. Slots: biz_name, biz_domain, dialogue_history,
/// task_name, task_description, task_examples.
extern const std::string_view kDatagenAgent;

}  // namespace templates

// Line labels shared by the templates and the stub clients that read them.
inline constexpr std::string_view kCurrentQueryLabel = "User's current query: ";
inline constexpr std::string_view kHistoryLabel = "Historical dialogue: ";
inline constexpr std::string_view kRewriteRulesHeading = "Query Rewriting Rules";
inline constexpr std::string_view kReferencePrefix = "Reference Historical Article ";
inline constexpr std::string_view kKnowledgeBaseHeading = "[Knowledge Base]";
inline constexpr std::string_view kEmptyKnowledgeBase =
    "(The knowledge base returned empty results. Follow the instruction for empty knowledge base results.)";
inline constexpr std::string_view kUserQuestionLabel = "The user's original question is: ";
inline constexpr std::string_view kNoHistory = "(none)";
// Judge prompts wrap the two texts under comparison in these markers.
inline constexpr std::string_view kJudgeCandidateOpen = "<candidate>\n";
inline constexpr std::string_view kJudgeCandidateClose = "\n</candidate>";
inline constexpr std::string_view kJudgeReferenceOpen = "<reference>\n";
inline constexpr std::string_view kJudgeReferenceClose = "\n</reference>";

}  // namespace himes::pipeline
