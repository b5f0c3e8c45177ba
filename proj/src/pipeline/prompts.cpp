#include "himes/pipeline/prompts.hpp"

namespace himes::pipeline {

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const std::string name(tmpl.substr(open + 2, close - open - 2));
    auto it = slots.find(name);
    if (it == slots.end()) throw TemplateError(name);
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

namespace templates {

const std::string_view kRewriter = R"(System: Rewrite the user's latest message into a single self-contained search query.

Useful Information
User's current query: {{query_old}}
Historical dialogue: {{history}}

Query Rewriting Rules
- Resolve pronouns and omitted references using the dialogue above.
- Carry forward constraints the user stated in earlier turns when they still apply.
- Fix obvious misspellings and drop filler words that do not help retrieval.
- Keep the user's intent. Add nothing the dialogue does not support.
- If there is no historical dialogue, do not perform rewriting.
- If the latest message is unrelated to the dialogue, or already complete, return it unchanged.
- Leave out private personal names.

Account
Account id: {{biz_id}}
Account name and domain: {{agent}}

Reply Format Example
{ "query_rewrited": <rewrited query>}
)";

const std::string_view kResponder = R"(System:
{{meta_prompt}}Answer the follower's question as the author of this account, drawing on the articles in the [Knowledge Base] and matching the voice of the author's past comment replies.

Knowledge Base Usage Instructions
- Each article appears as "Reference Historical Article {title}: {content}".
- Use the articles for substance and style. Do not cite them or mention them by title.
- If the knowledge base returns empty results, say that no related article has been written yet and answer from general experience.

[Knowledge Base]
{{knowledge_base}}

Comment Replies
{{comments}}

Reply Requirements
- Stay under 150 characters; split into short paragraphs when needed.
- Plain text only, no markdown and no exclamation marks.
- Do not invent facts. Say so when something is unknown.

User Question
The user's original question is: {{query}}
)";

const std::string_view kDatagenUser = R"(System: Play a user talking with an assistant.

Your Role
You are a {{user_role}}, and your original question is: {{user_question}}.

Dialogue History
{{dialogue_history}}

Reply Requirements
- Decide first whether the assistant has answered your original question.
- If not, ask your next follow-up. Otherwise thank the assistant or close the conversation.
- The conversation should show {{task_name}}: {{task_description}}
- Style references for {{task_name}} (copy the manner only, not the content): {{task_examples}}

Reply Format Example
{ "is_solved": <True or False>, "user_answer": <your message for this round>}
)";

const std::string_view kDatagenAgent = R"(System: Play the author of an article account replying to a follower.

Your Role
Your account name is {{biz_name}} and it covers: {{biz_domain}}.

Dialogue History
{{dialogue_history}}

Reply Requirements
- Decide first whether the follower's original question has been resolved.
- If not, answer or ask a clarifying question. Otherwise wrap the conversation up.
- The conversation should show {{task_name}}: {{task_description}}
- Style references for {{task_name}}: {{task_examples}}

Reply Format Example
{ "is_last_turn": <True or False>, "biz_answer": <your message for this round>}
)";

}  // namespace templates

}  // namespace himes::pipeline
