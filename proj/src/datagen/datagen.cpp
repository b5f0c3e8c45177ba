#include "himes/datagen/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <istream>
#include <random>
#include <set>
#include <thread>

#include "himes/core/errors.hpp"
#include "himes/core/hash.hpp"
#include "himes/core/json_reply.hpp"
#include "himes/core/text.hpp"
#include "himes/pipeline/pipeline.hpp"
#include "himes/pipeline/prompts.hpp"

namespace himes::datagen {

using nlohmann::json;

namespace {

bool blank(std::string_view s) { return core::normalize_text(s).empty(); }

std::string_view role_name(PersonaRole r) { return r == PersonaRole::user ? "user" : "agent"; }

PersonaRole role_from(std::string_view s) {
  if (s == "user") return PersonaRole::user;
  if (s == "agent" || s == "assistant") return PersonaRole::agent;
  throw ValidationError("unknown persona role '" + std::string(s) + "'");
}

// Rest of the line after `label`, without a trailing period.
std::string line_value(std::string_view prompt, std::string_view label) {
  const auto at = prompt.find(label);
  if (at == std::string_view::npos) return {};
  auto rest = prompt.substr(at + label.size());
  rest = rest.substr(0, rest.find('\n'));
  if (!rest.empty() && rest.back() == '.') rest.remove_suffix(1);
  return std::string(rest);
}

// Number of "agent: " lines inside the prompt's Dialogue History section.
std::size_t agent_turns_in(std::string_view prompt) {
  constexpr std::string_view kOpen = "Dialogue History\n";
  const auto at = prompt.find(kOpen);
  if (at == std::string_view::npos) return 0;
  auto section = prompt.substr(at + kOpen.size());
  section = section.substr(0, section.find("\n\n"));
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < section.size();) {
    if (section.substr(pos).starts_with("agent: ")) ++n;
    const auto nl = section.find('\n', pos);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return n;
}

std::string iso_date(core::Timestamp ts) { return core::format_rfc3339(ts).substr(0, 10); }

std::string user_role_text(const DialogueBlueprint& bp) {
  std::string role = bp.user.description;
  role += bp.style == Style::chit_chat ? ", chatting casually" : ", trying to get a concrete task done";
  return role;
}

std::string user_question_text(const DialogueBlueprint& bp) {
  if (!bp.time_sensitive) return bp.core_question;
  return bp.core_question + " (asked on " + iso_date(bp.timestamp) + ", and the answer depends on that date)";
}

std::string examples_text(const RewriteTask& task) {
  std::string out;
  for (const auto& e : task.examples) {
    if (!out.empty()) out += "\n---\n";
    out += e;
  }
  return out.empty() ? std::string(pipeline::kNoHistory) : out;
}

Persona persona_from_json(const json& j, PersonaRole role) {
  Persona p;
  p.role = role;
  if (j.is_string()) {
    p.description = j.get<std::string>();
    p.name = role == PersonaRole::user ? "user" : p.description;
    return p;
  }
  if (!j.is_object()) throw ValidationError(std::string(role_name(role)) + "_persona must be a string or object");
  p.name = j.value("name", std::string{});
  p.description = j.value("description", j.value("domain", std::string{}));
  if (auto it = j.find("style"); it != j.end() && !it->is_null()) p.style = style_from_string(it->get<std::string>());
  return p;
}

json persona_to_json(const Persona& p) {
  json j{{"role", role_name(p.role)}, {"name", p.name}, {"description", p.description}};
  j["style"] = p.style ? json(to_string(*p.style)) : json(nullptr);
  return j;
}

Persona persona_parse(const json& j) {
  Persona p = persona_from_json(j, role_from(j.at("role").get<std::string>()));
  return p;
}

void validate_source(const SourceDialogue& s) {
  std::vector<std::string> issues;
  if (blank(s.user.description)) issues.emplace_back("user persona needs a description");
  if (blank(s.agent.name)) issues.emplace_back("agent persona needs a name");
  if (blank(s.agent.description)) issues.emplace_back("agent persona needs a domain");
  if (blank(s.core_question)) issues.emplace_back("core_question must be non-empty");
  if (!issues.empty()) throw ValidationError("invalid source dialogue '" + s.source_id + "'", std::move(issues));
}

}  // namespace

// ---- catalog -------------------------------------------------------------

RewriteTaskCatalog RewriteTaskCatalog::from_json(const json& doc) {
  RewriteTaskCatalog cat;
  std::vector<std::string> issues;
  if (!doc.is_object() || !doc.contains("tasks") || !doc["tasks"].is_array())
    throw ValidationError("rewrite task file needs a \"tasks\" array");
  std::set<std::string> seen;
  for (const auto& t : doc["tasks"]) {
    RewriteTask task;
    try {
      task.name = t.at("name").get<std::string>();
      task.description = t.value("description", std::string{});
      if (t.contains("examples")) task.examples = t["examples"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      issues.emplace_back(e.what());
      continue;
    }
    if (blank(task.name)) issues.emplace_back("task with empty name");
    else if (!seen.insert(task.name).second) issues.push_back("duplicate task '" + task.name + "'");
    if (blank(task.description)) issues.push_back("task '" + task.name + "' has no description");
    cat.tasks_.push_back(std::move(task));
  }
  if (cat.tasks_.empty()) issues.emplace_back("no tasks");
  if (!issues.empty()) throw ValidationError("invalid rewrite task catalog", std::move(issues));
  return cat;
}

RewriteTaskCatalog RewriteTaskCatalog::shipped_default() {
  return from_json(json::parse(shipped_rewrite_tasks_json()));
}

const RewriteTask& RewriteTaskCatalog::find(std::string_view name) const {
  for (const auto& t : tasks_)
    if (t.name == name) return t;
  throw ValidationError("unknown rewrite task '" + std::string(name) + "'");
}

// ---- enums ---------------------------------------------------------------

std::string_view to_string(Style s) noexcept { return s == Style::chit_chat ? "chit-chat" : "task-oriented"; }

Style style_from_string(std::string_view s) {
  if (s == "chit-chat") return Style::chit_chat;
  if (s == "task-oriented") return Style::task_oriented;
  throw ValidationError("unknown style '" + std::string(s) + "'");
}

std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::user_solved: return "user_solved";
    case Termination::agent_last_turn: return "agent_last_turn";
    case Termination::max_turns: return "max_turns";
    case Termination::parse_failure: return "parse_failure";
    case Termination::client_error: return "client_error";
  }
  return "max_turns";
}

Termination termination_from_string(std::string_view s) {
  for (auto t : {Termination::user_solved, Termination::agent_last_turn, Termination::max_turns,
                 Termination::parse_failure, Termination::client_error})
    if (to_string(t) == s) return t;
  throw ValidationError("unknown termination reason '" + std::string(s) + "'");
}

// ---- sources and blueprints ----------------------------------------------

std::vector<SourceDialogue> read_sources(std::istream& in) {
  std::vector<SourceDialogue> out;
  std::vector<std::string> issues;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    try {
      const auto j = json::parse(line);
      SourceDialogue s;
      s.source_id = j.contains("source_id") ? j["source_id"].get<std::string>() : "src-" + std::to_string(lineno);
      s.user = persona_from_json(j.at("user_persona"), PersonaRole::user);
      s.agent = persona_from_json(j.at("agent_persona"), PersonaRole::agent);
      s.user.style.reset();
      s.agent.style.reset();
      s.core_question = j.at("core_question").get<std::string>();
      validate_source(s);
      out.push_back(std::move(s));
    } catch (const ValidationError& e) {
      issues.push_back(where + e.what());
    } catch (const json::exception& e) {
      issues.push_back(where + e.what());
    }
  }
  if (!issues.empty()) throw ValidationError("invalid source file", std::move(issues));
  return out;
}

std::vector<DialogueBlueprint> build_blueprints(const SourceDialogue& source, std::uint64_t seed,
                                                const RewriteTaskCatalog& catalog) {
  validate_source(source);
  // mt19937_64 output is fixed by the standard, and only raw draws are used,
  // so blueprints are identical on every platform.
  std::mt19937_64 rng(seed ^ core::fnv1a64(source.source_id));
  constexpr std::uint64_t kYearSeconds = 365ULL * 24 * 3600;
  const auto base = core::parse_rfc3339("2024-01-01T00:00:00Z");

  std::vector<DialogueBlueprint> out;
  std::size_t variant = 0;
  for (bool time_sensitive : {true, false}) {
    for (Style style : {Style::chit_chat, Style::task_oriented}) {
      DialogueBlueprint bp;
      bp.blueprint_id = source.source_id + "-v" + std::to_string(variant++);
      bp.source_id = source.source_id;
      bp.user = source.user;
      bp.user.role = PersonaRole::user;
      bp.user.style = style;
      bp.agent = source.agent;
      bp.agent.role = PersonaRole::agent;
      bp.agent.style.reset();
      bp.core_question = source.core_question;
      bp.timestamp = base + std::chrono::seconds(rng() % kYearSeconds);
      bp.time_sensitive = time_sensitive;
      bp.style = style;
      bp.rewrite_task = catalog.tasks()[rng() % catalog.tasks().size()].name;
      out.push_back(std::move(bp));
    }
  }
  return out;
}

// ---- prompts -------------------------------------------------------------

std::string render_sim_history(std::span<const SimTurn> turns) {
  if (turns.empty()) return std::string(pipeline::kNoHistory);
  std::string out;
  for (const auto& t : turns) {
    if (!out.empty()) out += '\n';
    out += role_name(t.role);
    out += ": ";
    std::string text = t.text;
    std::replace(text.begin(), text.end(), '\n', ' ');
    out += text;
  }
  return out;
}

std::string render_user_prompt(const DialogueBlueprint& bp, std::span<const SimTurn> history,
                               const RewriteTaskCatalog& catalog) {
  const auto& task = catalog.find(bp.rewrite_task);
  return pipeline::render_template(pipeline::templates::kDatagenUser,
                                   {{"user_role", user_role_text(bp)},
                                    {"user_question", user_question_text(bp)},
                                    {"dialogue_history", render_sim_history(history)},
                                    {"task_name", task.name},
                                    {"task_description", task.description},
                                    {"task_examples", examples_text(task)}});
}

std::string render_agent_prompt(const DialogueBlueprint& bp, std::span<const SimTurn> history,
                                const RewriteTaskCatalog& catalog) {
  const auto& task = catalog.find(bp.rewrite_task);
  return pipeline::render_template(pipeline::templates::kDatagenAgent,
                                   {{"biz_name", bp.agent.name},
                                    {"biz_domain", bp.agent.description},
                                    {"dialogue_history", render_sim_history(history)},
                                    {"task_name", task.name},
                                    {"task_description", task.description},
                                    {"task_examples", examples_text(task)}});
}

// ---- simulation ----------------------------------------------------------

namespace {

std::optional<SimTurn> parse_turn(const std::string& reply, PersonaRole role) {
  const auto obj = core::extract_json_object(reply);
  if (!obj) return std::nullopt;
  const char* flag_key = role == PersonaRole::user ? "is_solved" : "is_last_turn";
  const char* text_key = role == PersonaRole::user ? "user_answer" : "biz_answer";
  auto f = obj->find(flag_key);
  auto t = obj->find(text_key);
  if (f == obj->end() || t == obj->end() || !t->is_string()) return std::nullopt;
  const auto flag = core::parse_flag(*f);
  if (!flag || blank(t->get<std::string>())) return std::nullopt;
  return SimTurn{role, t->get<std::string>(), reply, *flag};
}

}  // namespace

SimTranscript simulate_dialogue(const DialogueBlueprint& bp, clients::ChatClient& user_client,
                                clients::ChatClient& agent_client, const RewriteTaskCatalog& catalog,
                                std::size_t max_turns) {
  if (max_turns < 2) throw ValidationError("max_turns must be at least 2");
  SimTranscript tr;
  tr.blueprint = bp;
  bool closing = false;  // the user is satisfied; this agent reply is the last

  while (tr.turns.size() < max_turns) {
    const PersonaRole role = tr.turns.size() % 2 == 0 ? PersonaRole::user : PersonaRole::agent;
    auto& client = role == PersonaRole::user ? user_client : agent_client;
    const std::string prompt = role == PersonaRole::user ? render_user_prompt(bp, tr.turns, catalog)
                                                         : render_agent_prompt(bp, tr.turns, catalog);
    std::optional<SimTurn> turn;
    try {
      std::string reply = client.generate(prompt);
      turn = parse_turn(reply, role);
      if (!turn) {
        reply = client.generate(prompt + std::string(kFormatReminder));
        turn = parse_turn(reply, role);
        if (!turn) {
          tr.termination = Termination::parse_failure;
          tr.error = std::string(role_name(role)) + " reply unparseable after one re-prompt";
          return tr;
        }
      }
    } catch (const TransportError& e) {
      tr.termination = Termination::client_error;
      tr.error = e.what();
      return tr;
    }
    tr.turns.push_back(*turn);
    if (closing) {
      tr.termination = Termination::user_solved;
      return tr;
    }
    if (role == PersonaRole::user && turn->flag) {
      closing = true;
      if (tr.turns.size() >= max_turns) {
        tr.termination = Termination::user_solved;
        return tr;
      }
    } else if (role == PersonaRole::agent && turn->flag) {
      tr.termination = Termination::agent_last_turn;
      return tr;
    }
  }
  tr.termination = Termination::max_turns;
  return tr;
}

// ---- rewrite samples -----------------------------------------------------

std::vector<RewriteSample> emit_rewrite_samples(const SimTranscript& transcript, clients::ChatClient* annotator) {
  std::vector<RewriteSample> out;
  const auto& bp = transcript.blueprint;
  std::vector<pipeline::DialogueTurn> prior;
  bool seen_user = false;
  for (std::size_t i = 0; i < transcript.turns.size(); ++i) {
    const auto& t = transcript.turns[i];
    if (t.role == PersonaRole::user) {
      if (seen_user) {
        RewriteSample s;
        s.sample_id = bp.blueprint_id + "-s" + std::to_string(out.size());
        s.blueprint_id = bp.blueprint_id;
        s.rewrite_task = bp.rewrite_task;
        s.history = pipeline::DialogueHistory(prior);
        s.query_old = t.text;
        if (annotator) {
          pipeline::AccountProfile account;
          account.biz_id = bp.source_id;
          account.name = bp.agent.name;
          account.domain = bp.agent.description;
          auto outcome = pipeline::rewrite_query(s.history, s.query_old, *annotator, account);
          if (outcome.client_called && !outcome.warning) s.annotated_rewrite = outcome.query;
        }
        out.push_back(std::move(s));
      }
      seen_user = true;
    }
    prior.push_back({t.role == PersonaRole::user ? pipeline::Role::user : pipeline::Role::assistant, t.text,
                     bp.timestamp + std::chrono::seconds(static_cast<long long>(i))});
  }
  return out;
}

// ---- quality -------------------------------------------------------------

std::string render_quality_prompt(const SimTranscript& transcript) {
  std::string p =
      "Rate how well the dialogue below pursues the user's question and how natural it reads. Reply with "
      "\"score: N\" where N is an integer from 0 to 100, and nothing else.\n\n";
  p += pipeline::kJudgeCandidateOpen;
  p += render_sim_history(transcript.turns);
  p += pipeline::kJudgeCandidateClose;
  p += "\n\n";
  p += pipeline::kJudgeReferenceOpen;
  p += transcript.blueprint.core_question;
  p += pipeline::kJudgeReferenceClose;
  p += '\n';
  return p;
}

std::vector<std::optional<int>> score_transcripts(std::span<const SimTranscript> transcripts,
                                                  clients::ChatClient& judge) {
  std::vector<std::optional<int>> out;
  out.reserve(transcripts.size());
  for (const auto& t : transcripts) {
    const auto prompt = render_quality_prompt(t);
    auto score = core::parse_score_reply(judge.generate(prompt));
    if (!score) score = core::parse_score_reply(judge.generate(prompt + "\nReply exactly as \"score: N\"."));
    out.push_back(score);
  }
  return out;
}

std::vector<std::size_t> top_quartile(std::span<const std::optional<int>> scores) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i]) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return *scores[a] > *scores[b]; });
  idx.resize((idx.size() + 3) / 4);
  return idx;
}

// ---- serialization -------------------------------------------------------

json to_json(const DialogueBlueprint& bp) {
  return {{"blueprint_id", bp.blueprint_id},
          {"source_id", bp.source_id},
          {"user_persona", persona_to_json(bp.user)},
          {"agent_persona", persona_to_json(bp.agent)},
          {"core_question", bp.core_question},
          {"timestamp", core::format_rfc3339(bp.timestamp)},
          {"time_sensitive", bp.time_sensitive},
          {"style", to_string(bp.style)},
          {"rewrite_task", bp.rewrite_task}};
}

DialogueBlueprint blueprint_from_json(const json& j) {
  try {
    DialogueBlueprint bp;
    bp.blueprint_id = j.at("blueprint_id");
    bp.source_id = j.at("source_id");
    bp.user = persona_parse(j.at("user_persona"));
    bp.agent = persona_parse(j.at("agent_persona"));
    bp.core_question = j.at("core_question");
    bp.timestamp = core::parse_rfc3339(j.at("timestamp").get<std::string>());
    bp.time_sensitive = j.at("time_sensitive");
    bp.style = style_from_string(j.at("style").get<std::string>());
    bp.rewrite_task = j.at("rewrite_task");
    return bp;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid blueprint: ") + e.what());
  }
}

json to_json(const SimTranscript& t) {
  json turns = json::array();
  for (const auto& turn : t.turns)
    turns.push_back({{"role", role_name(turn.role)}, {"text", turn.text}, {"raw", turn.raw}, {"flag", turn.flag}});
  json j{{"schema", kSchema},       {"kind", "transcript"}, {"blueprint", to_json(t.blueprint)},
         {"turns", turns},          {"termination", to_string(t.termination)}};
  j["error"] = t.error ? json(*t.error) : json(nullptr);
  return j;
}

SimTranscript transcript_from_json(const json& j) {
  try {
    if (j.at("schema") != kSchema) throw ValidationError("unsupported schema " + j.at("schema").dump());
    SimTranscript t;
    t.blueprint = blueprint_from_json(j.at("blueprint"));
    for (const auto& turn : j.at("turns"))
      t.turns.push_back({role_from(turn.at("role").get<std::string>()), turn.at("text"), turn.at("raw"),
                         turn.at("flag")});
    t.termination = termination_from_string(j.at("termination").get<std::string>());
    if (j.contains("error") && !j["error"].is_null()) t.error = j["error"].get<std::string>();
    return t;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid transcript: ") + e.what());
  }
}

json to_json(const RewriteSample& s) {
  json j{{"schema", kSchema},
         {"kind", "rewrite_sample"},
         {"sample_id", s.sample_id},
         {"blueprint_id", s.blueprint_id},
         {"rewrite_task", s.rewrite_task},
         {"history", pipeline::to_json(s.history)},
         {"query_old", s.query_old}};
  j["annotated_rewrite"] = s.annotated_rewrite ? json(*s.annotated_rewrite) : json(nullptr);
  return j;
}

RewriteSample rewrite_sample_from_json(const json& j) {
  try {
    if (j.at("schema") != kSchema) throw ValidationError("unsupported schema " + j.at("schema").dump());
    RewriteSample s;
    s.sample_id = j.at("sample_id");
    s.blueprint_id = j.at("blueprint_id");
    s.rewrite_task = j.at("rewrite_task");
    s.history = pipeline::history_from_json(j.at("history"));
    s.query_old = j.at("query_old");
    if (!j.at("annotated_rewrite").is_null()) s.annotated_rewrite = j["annotated_rewrite"].get<std::string>();
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid rewrite sample: ") + e.what());
  }
}

// ---- stub participants ---------------------------------------------------

std::string StubUserAgent::generate(std::string_view prompt) {
  static constexpr std::string_view kFollowUps[] = {
      "Could you say more about that?",
      "What should I do first?",
      "How does that apply in my case?",
      "Is there anything I should avoid?",
      "What about doing it on a tight budget?",
  };
  const std::size_t answered = agent_turns_in(prompt);
  const std::string question = line_value(prompt, "your original question is: ");
  json reply;
  if (solve_after_ && answered >= *solve_after_) {
    reply = {{"is_solved", true}, {"user_answer", "Thanks, that answers my question."}};
  } else if (answered == 0) {
    reply = {{"is_solved", false}, {"user_answer", question.empty() ? "I have a question." : question}};
  } else {
    reply = {{"is_solved", false}, {"user_answer", kFollowUps[(answered - 1) % std::size(kFollowUps)]}};
  }
  return reply.dump();
}

std::string StubAccountAgent::generate(std::string_view prompt) {
  const std::size_t nth = agent_turns_in(prompt) + 1;
  const std::string domain = line_value(prompt, "it covers: ");
  const bool last = finish_after_ && nth >= *finish_after_;
  return json{{"is_last_turn", last},
              {"biz_answer", "Point " + std::to_string(nth) + " from my writing on " +
                                 (domain.empty() ? std::string("this topic") : domain) + "."}}
      .dump();
}

// ---- runner --------------------------------------------------------------

DatagenResult run_datagen(std::span<const SourceDialogue> sources, const DatagenClients& clients,
                          const RewriteTaskCatalog& catalog, const DatagenOptions& options) {
  if (!clients.user || !clients.agent) throw ValidationError("datagen needs user and agent clients");
  if (options.quality_pass && !clients.judge) throw ValidationError("the quality pass needs a judge client");
  if (options.parallelism == 0) throw ValidationError("parallelism must be at least 1");
  if (options.max_turns < 2) throw ValidationError("max_turns must be at least 2");

  DatagenResult result;
  for (const auto& s : sources) {
    auto bps = build_blueprints(s, options.seed, catalog);
    std::move(bps.begin(), bps.end(), std::back_inserter(result.blueprints));
  }

  const std::size_t n = result.blueprints.size();
  result.transcripts.resize(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        result.transcripts[i] =
            simulate_dialogue(result.blueprints[i], *clients.user, *clients.agent, catalog, options.max_turns);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(options.parallelism, std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  if (options.quality_pass) {
    result.quality = score_transcripts(result.transcripts, *clients.judge);
    result.selected = top_quartile(result.quality);
  } else {
    for (std::size_t i = 0; i < n; ++i) result.selected.push_back(i);
  }
  auto ordered = result.selected;
  std::sort(ordered.begin(), ordered.end());
  for (std::size_t i : ordered) {
    auto samples = emit_rewrite_samples(result.transcripts[i], clients.annotator);
    std::move(samples.begin(), samples.end(), std::back_inserter(result.samples));
  }
  return result;
}

}  // namespace himes::datagen
