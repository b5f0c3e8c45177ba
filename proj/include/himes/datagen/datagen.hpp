#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "himes/clients/chat.hpp"
#include "himes/core/time.hpp"
#include "himes/pipeline/dialogue.hpp"

namespace himes::datagen {

inline constexpr std::string_view kSchema = "himes-datagen/1";

// ---- rewrite task catalog ------------------------------------------------

struct RewriteTask {
  std::string name;
  std::string description;
  std::vector<std::string> examples;
};

class RewriteTaskCatalog {
 public:
  /// {"tasks": [{name, description, examples}]}. Throws ValidationError
  /// listing duplicates and empty fields.
  static RewriteTaskCatalog from_json(const nlohmann::json& doc);
  static RewriteTaskCatalog shipped_default();

  const std::vector<RewriteTask>& tasks() const noexcept { return tasks_; }
  /// Throws ValidationError for an unknown name.
  const RewriteTask& find(std::string_view name) const;

 private:
  std::vector<RewriteTask> tasks_;
};

/// Raw text of the shipped task file.
std::string_view shipped_rewrite_tasks_json();

// ---- personas and blueprints ---------------------------------------------

enum class Style { chit_chat, task_oriented };
std::string_view to_string(Style s) noexcept;
Style style_from_string(std::string_view s);

enum class PersonaRole { user, agent };

/// A simulated participant. Only user personas carry a style.
struct Persona {
  PersonaRole role = PersonaRole::user;
  std::string name;
  std::string description;  // users: who they are; agents: the account's domain
  std::optional<Style> style;

  friend bool operator==(const Persona&, const Persona&) = default;
};

/// One input record: the people in a seed conversation and what the user wants.
struct SourceDialogue {
  std::string source_id;
  Persona user;
  Persona agent;
  std::string core_question;
};

/// JSONL of {source_id?, user_persona, agent_persona, core_question}. A
/// persona is either a description string or {name, description|domain}.
/// Missing ids become "src-<line>". Throws ValidationError naming every bad line.
std::vector<SourceDialogue> read_sources(std::istream& in);

struct DialogueBlueprint {
  std::string blueprint_id;
  std::string source_id;
  Persona user;
  Persona agent;
  std::string core_question;
  core::Timestamp timestamp{};
  bool time_sensitive = false;
  Style style = Style::chit_chat;
  std::string rewrite_task;

  friend bool operator==(const DialogueBlueprint&, const DialogueBlueprint&) = default;
};

/// The four background variants of a source, in the order
/// (time-sensitive, chit-chat), (time-sensitive, task), (timeless, chit-chat),
/// (timeless, task). Timestamps and rewrite tasks are drawn from a generator
/// seeded by (seed, source_id). Throws ValidationError on missing persona
/// fields or core question.
std::vector<DialogueBlueprint> build_blueprints(const SourceDialogue& source, std::uint64_t seed,
                                                const RewriteTaskCatalog& catalog);

// ---- simulation ----------------------------------------------------------

struct SimTurn {
  PersonaRole role = PersonaRole::user;
  std::string text;
  std::string raw;  // model reply as received (the accepted attempt)
  bool flag = false;  // is_solved for users, is_last_turn for agents

  friend bool operator==(const SimTurn&, const SimTurn&) = default;
};

enum class Termination { user_solved, agent_last_turn, max_turns, parse_failure, client_error };
std::string_view to_string(Termination t) noexcept;
Termination termination_from_string(std::string_view s);

struct SimTranscript {
  DialogueBlueprint blueprint;
  std::vector<SimTurn> turns;
  Termination termination = Termination::max_turns;
  std::optional<std::string> error;  // parse or client failure detail

  friend bool operator==(const SimTranscript&, const SimTranscript&) = default;
};

/// "user: ..." / "agent: ..." lines, or "(none)" for an empty history.
std::string render_sim_history(std::span<const SimTurn> turns);

std::string render_user_prompt(const DialogueBlueprint& bp, std::span<const SimTurn> history,
                               const RewriteTaskCatalog& catalog);
std::string render_agent_prompt(const DialogueBlueprint& bp, std::span<const SimTurn> history,
                                const RewriteTaskCatalog& catalog);

inline constexpr std::string_view kFormatReminder =
    "\n\nFormat reminder: reply with exactly one JSON object shaped like the Reply Format Example above.";

inline constexpr std::size_t kDefaultMaxTurns = 12;

/// Alternates user and agent replies, starting with the user, until a
/// control flag ends the dialogue or max_turns replies exist. A user's
/// is_solved gets one closing agent reply (room permitting) before the stop.
/// An unparseable reply is re-prompted once with kFormatReminder; a second
/// failure ends the run with parse_failure. A client TransportError ends it
/// with client_error. The partial transcript is always kept. Throws
/// ValidationError when max_turns < 2.
SimTranscript simulate_dialogue(const DialogueBlueprint& bp, clients::ChatClient& user_client,
                                clients::ChatClient& agent_client, const RewriteTaskCatalog& catalog,
                                std::size_t max_turns = kDefaultMaxTurns);

// ---- rewrite samples -----------------------------------------------------

struct RewriteSample {
  std::string sample_id;
  std::string blueprint_id;
  std::string rewrite_task;
  pipeline::DialogueHistory history;  // everything before query_old
  std::string query_old;
  std::optional<std::string> annotated_rewrite;

  friend bool operator==(const RewriteSample&, const RewriteSample&) = default;
};

/// One sample per user turn after the first, with the full prior history.
/// With an annotator, asks it for a rewrite through the rewriter prompt;
/// an unusable or failed reply leaves the annotation empty.
std::vector<RewriteSample> emit_rewrite_samples(const SimTranscript& transcript,
                                                clients::ChatClient* annotator = nullptr);

// ---- quality pass --------------------------------------------------------

std::string render_quality_prompt(const SimTranscript& transcript);

/// Judge score in [0, 100] per transcript, nullopt when the judge's reply
/// never yields a score (one re-prompt).
std::vector<std::optional<int>> score_transcripts(std::span<const SimTranscript> transcripts,
                                                  clients::ChatClient& judge);

/// Indices of the top quartile (ceil(n/4) of the scored transcripts), best
/// first; ties keep input order. Unscored transcripts are never selected.
std::vector<std::size_t> top_quartile(std::span<const std::optional<int>> scores);

// ---- serialization -------------------------------------------------------

nlohmann::json to_json(const DialogueBlueprint& bp);
DialogueBlueprint blueprint_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimTranscript& t);
SimTranscript transcript_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RewriteSample& s);
RewriteSample rewrite_sample_from_json(const nlohmann::json& j);

// ---- deterministic participants ------------------------------------------

/// User stand-in: asks follow-ups about the question named in its prompt.
/// With solve_after = k it reports is_solved once k agent replies are in
/// the history; with nullopt it never sets the flag.
class StubUserAgent final : public clients::ChatClient {
 public:
  explicit StubUserAgent(std::optional<std::size_t> solve_after = std::nullopt) : solve_after_(solve_after) {}
  std::string generate(std::string_view prompt) override;
  std::string model_name() const override { return "stub-user"; }

 private:
  std::optional<std::size_t> solve_after_;
};

/// Account stand-in: answers with a line about its domain. With
/// finish_after = k it sets is_last_turn on its k-th reply.
class StubAccountAgent final : public clients::ChatClient {
 public:
  explicit StubAccountAgent(std::optional<std::size_t> finish_after = std::nullopt) : finish_after_(finish_after) {}
  std::string generate(std::string_view prompt) override;
  std::string model_name() const override { return "stub-account"; }

 private:
  std::optional<std::size_t> finish_after_;
};

// ---- batch runner --------------------------------------------------------

struct DatagenOptions {
  std::uint64_t seed = 0;
  std::size_t max_turns = kDefaultMaxTurns;
  std::size_t parallelism = 4;  // concurrent simulations
  bool quality_pass = false;
};

struct DatagenClients {
  clients::ChatClient* user = nullptr;
  clients::ChatClient* agent = nullptr;
  clients::ChatClient* annotator = nullptr;  // optional
  clients::ChatClient* judge = nullptr;      // required when quality_pass
};

struct DatagenResult {
  std::vector<DialogueBlueprint> blueprints;
  std::vector<SimTranscript> transcripts;  // same order as blueprints
  std::vector<std::optional<int>> quality;  // empty without a quality pass
  std::vector<std::size_t> selected;        // indices of the kept transcripts
  std::vector<RewriteSample> samples;       // from the selected transcripts
};

/// Blueprints for every source, simulated with at most `parallelism`
/// dialogues in flight. Output order never depends on scheduling.
DatagenResult run_datagen(std::span<const SourceDialogue> sources, const DatagenClients& clients,
                          const RewriteTaskCatalog& catalog, const DatagenOptions& options);

}  // namespace himes::datagen
