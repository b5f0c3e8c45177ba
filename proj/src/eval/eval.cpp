#include "himes/eval/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <set>

#include "himes/core/errors.hpp"
#include "himes/core/json_reply.hpp"
#include "himes/core/text.hpp"
#include "himes/pipeline/prompts.hpp"

namespace himes::eval {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- judging -------------------------------------------------------------

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::ca: return "ca";
    case Metric::qa: return "qa";
    case Metric::qr: return "qr";
  }
  return "ca";
}

namespace {

std::string wrap(std::string_view instructions, std::string_view candidate, std::string_view reference) {
  std::string p(instructions);
  p += "\nReply with \"score: N\" where N is an integer from 0 to 100, and nothing else.\n\n";
  p += pipeline::kJudgeCandidateOpen;
  p += candidate;
  p += pipeline::kJudgeCandidateClose;
  p += "\n\n";
  p += pipeline::kJudgeReferenceOpen;
  p += reference;
  p += pipeline::kJudgeReferenceClose;
  p += '\n';
  return p;
}

std::string join_lines(std::span<const std::string> items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += '\n';
    out += s;
  }
  return out.empty() ? std::string(pipeline::kNoHistory) : out;
}

}  // namespace

std::string render_judge_prompt(Metric metric, const JudgeContext& ctx) {
  switch (metric) {
    case Metric::ca:
      return wrap("Rate how faithfully the candidate answer agrees with the reference passages: its claims, tone "
                  "and facts should be supported by them.",
                  ctx.response, join_lines(ctx.golden_texts));
    case Metric::qa:
      return wrap("Rate how directly and usefully the candidate answer addresses the reference question.",
                  ctx.response, ctx.query);
    case Metric::qr: {
      std::string ref = ctx.history.render();
      if (!ref.empty()) ref += '\n';
      ref += "user: " + ctx.query;
      return wrap("Rate the candidate search query: it should state the final user turn of the reference dialogue "
                  "as a self-contained request, keep every constraint the dialogue established, and add nothing.",
                  ctx.rewritten_query, ref);
    }
  }
  return {};
}

std::optional<int> judge_score(Metric metric, const JudgeContext& ctx, clients::ChatClient& judge) {
  const auto prompt = render_judge_prompt(metric, ctx);
  try {
    if (auto s = core::parse_score_reply(judge.generate(prompt))) return s;
    return core::parse_score_reply(judge.generate(prompt + std::string(kJudgeReminder)));
  } catch (const TransportError&) {
    return std::nullopt;
  }
}

std::optional<double> mean_of(std::span<const std::optional<int>> scores) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : scores) {
    if (!s) continue;
    sum += *s;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

// ---- test set ------------------------------------------------------------

std::vector<TestCase> read_test_set(std::istream& in) {
  std::vector<TestCase> out;
  std::vector<std::string> issues;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    try {
      const auto j = json::parse(line);
      TestCase c;
      c.case_id = j.value("case_id", "case-" + std::to_string(out.size() + 1));
      c.user_id = j.value("user_id", std::string("user-1"));
      c.history = pipeline::history_from_json(j.value("history", json::array()));
      c.query = j.at("query").get<std::string>();
      if (core::normalize_text(c.query).empty()) throw ValidationError("query must be non-empty");
      auto opt = [&](const char* key) -> std::optional<std::string> {
        if (auto it = j.find(key); it != j.end() && !it->is_null()) return it->get<std::string>();
        return std::nullopt;
      };
      if (auto ts = opt("timestamp")) c.timestamp = core::parse_rfc3339(*ts);
      c.gold_doc_id = opt("gold_doc_id");
      c.annotated_rewrite = opt("annotated_rewrite");
      c.reference_answer = opt("reference_answer");
      out.push_back(std::move(c));
    } catch (const json::exception& e) {
      issues.push_back(where + e.what());
    } catch (const ValidationError& e) {
      issues.push_back(where + e.what());
    }
  }
  if (!issues.empty()) throw ValidationError("invalid test set", std::move(issues));
  return out;
}

// ---- grid ----------------------------------------------------------------

std::vector<AblationSpec> default_grid() {
  auto make = [](std::string label, bool stm, bool ltm, bool history) {
    pipeline::PipelineConfig c;
    c.stm_enabled = stm;
    c.ltm_enabled = ltm;
    c.include_history_in_retrieval = history;
    return AblationSpec{std::move(label), c};
  };
  return {make("w/o history + RAG", false, false, false), make("w/ history + RAG", false, false, true),
          make("Rewriter + RAG", true, false, false), make("w/ history + RAG_attn", false, true, true),
          make("Rewriter + RAG_attn", true, true, false)};
}

std::vector<AblationSpec> grid_from_json(const json& j, const pipeline::PipelineConfig& base) {
  if (!j.is_object() || !j.contains("rows") || !j["rows"].is_array()) throw ValidationError("grid needs a \"rows\" array");
  std::vector<AblationSpec> grid;
  std::vector<std::string> issues;
  std::set<std::string> labels;
  for (const auto& row : j["rows"]) {
    try {
      AblationSpec spec;
      spec.label = row.at("label").get<std::string>();
      spec.config = pipeline::config_from_json(row.value("config", json::object()), base);
      if (!labels.insert(spec.label).second) issues.push_back("duplicate label '" + spec.label + "'");
      grid.push_back(std::move(spec));
    } catch (const json::exception& e) {
      issues.emplace_back(e.what());
    } catch (const ValidationError& e) {
      issues.emplace_back(e.what());
    }
  }
  if (grid.empty() && issues.empty()) issues.emplace_back("grid has no rows");
  if (!issues.empty()) throw ValidationError("invalid grid", std::move(issues));
  return grid;
}

// ---- running -------------------------------------------------------------

std::optional<double> retrieval_hit_rate(std::span<const TestCase> cases,
                                         std::span<const std::optional<pipeline::PipelineTrace>> traces) {
  std::size_t eligible = 0, hits = 0;
  for (std::size_t i = 0; i < cases.size() && i < traces.size(); ++i) {
    if (!cases[i].gold_doc_id || !traces[i]) continue;
    ++eligible;
    for (const auto& g : traces[i]->golden) {
      if (g.doc_id == *cases[i].gold_doc_id) {
        ++hits;
        break;
      }
    }
  }
  if (eligible == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(eligible);
}

namespace {

struct RowRun {
  std::vector<std::optional<pipeline::PipelineTrace>> traces;  // one slot per case
  std::vector<std::string> errors;                             // per case, empty when answered
};

// Answers every case on a private copy of the store. Stage clocks are
// frozen and stored queries take the case's timestamp, so the run depends
// only on its inputs.
RowRun run_row(std::span<const TestCase> cases, const pipeline::PipelineConfig& config, const EvalClients& clients,
               const memory::MemoryStore& base_store, const pipeline::KnowledgeBase& kb,
               const pipeline::AccountProfile& account) {
  auto store = base_store.clone_in_memory();
  pipeline::Pipeline p(config, {clients.rewriter, clients.responder, clients.embedder, clients.classifier}, kb,
                       store.get(), account);
  p.set_clock(pipeline::Pipeline::frozen_clock());
  core::Timestamp now{};
  p.set_wall_clock([&now] { return now; });

  RowRun run;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    now = c.timestamp.value_or(core::Timestamp{} + std::chrono::seconds(static_cast<long long>(i)));
    try {
      run.traces.push_back(p.answer(c.user_id, c.history, c.query).trace);
      run.errors.emplace_back();
    } catch (const Error& e) {
      run.traces.push_back(std::nullopt);
      run.errors.emplace_back(e.what());
    }
  }
  return run;
}

JudgeContext context_for(const TestCase& c, const pipeline::PipelineTrace& t) {
  JudgeContext ctx;
  ctx.query = c.query;
  ctx.response = t.response;
  for (const auto& g : t.golden) ctx.golden_texts.push_back(g.text);
  ctx.rewritten_query = t.rewritten_query.value_or(t.retrieval_query);
  ctx.history = c.history;
  return ctx;
}

// Judge scores for the answered cases; fills samples and the aggregate.
MetricScores judge_row(std::span<const TestCase> cases, const RowRun& run, const EvalClients& clients,
                       bool judge_metrics, std::vector<SampleResult>& samples) {
  MetricScores m;
  std::vector<std::optional<int>> ca, qa, qr;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    SampleResult s;
    s.case_id = cases[i].case_id;
    if (!run.traces[i]) {
      s.error = run.errors[i];
      samples.push_back(std::move(s));
      continue;
    }
    const auto& t = *run.traces[i];
    ++m.n_samples;
    if (cases[i].gold_doc_id) {
      s.gold_hit = 0;
      for (const auto& g : t.golden)
        if (g.doc_id == *cases[i].gold_doc_id) s.gold_hit = 1;
    }
    if (judge_metrics && clients.judge) {
      const auto ctx = context_for(cases[i], t);
      s.ca = judge_score(Metric::ca, ctx, *clients.judge);
      s.qa = judge_score(Metric::qa, ctx, *clients.judge);
      ca.push_back(s.ca);
      qa.push_back(s.qa);
      if (t.rewritten_query) {
        s.qr = judge_score(Metric::qr, ctx, *clients.judge);
        qr.push_back(s.qr);
      }
    }
    samples.push_back(std::move(s));
  }
  auto dropped = [](const std::vector<std::optional<int>>& v) {
    return static_cast<std::size_t>(std::count(v.begin(), v.end(), std::nullopt));
  };
  m.ca = mean_of(ca);
  m.qa = mean_of(qa);
  m.qr = mean_of(qr);
  m.dropped_ca = dropped(ca);
  m.dropped_qa = dropped(qa);
  m.dropped_qr = dropped(qr);
  return m;
}

}  // namespace

std::vector<AblationRow> run_ablation(std::span<const TestCase> cases, std::span<const AblationSpec> grid,
                                      const EvalClients& clients, const memory::MemoryStore& base_store,
                                      const pipeline::KnowledgeBase& kb, const pipeline::AccountProfile& account,
                                      const EvalOptions& options) {
  if (grid.empty()) throw ValidationError("ablation grid is empty");
  std::set<std::string> labels;
  for (const auto& g : grid)
    if (!labels.insert(g.label).second) throw ValidationError("duplicate grid label '" + g.label + "'");

  std::vector<AblationRow> rows;
  for (const auto& spec : grid) {
    AblationRow row;
    row.label = spec.label;
    row.config = spec.config;
    RowRun run;
    try {
      run = run_row(cases, spec.config, clients, base_store, kb, account);
    } catch (const Error& e) {
      row.error = e.what();
      row.failures = cases.size();
      rows.push_back(std::move(row));
      continue;
    }
    row.metrics = judge_row(cases, run, clients, options.judge_metrics, row.samples);
    row.retrieval_hit_rate = retrieval_hit_rate(cases, run.traces);
    for (auto& t : run.traces) {
      if (t) row.traces.push_back(std::move(*t));
      else ++row.failures;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<LambdaRow> lambda_sweep(std::span<const TestCase> cases, std::span<const double> lambdas,
                                    const pipeline::PipelineConfig& config, const EvalClients& clients,
                                    const memory::MemoryStore& base_store, const pipeline::KnowledgeBase& kb,
                                    const pipeline::AccountProfile& account, const reward::RewardConfig& reward,
                                    const EvalOptions& options) {
  if (lambdas.empty()) throw ValidationError("lambda list is empty");
  if (std::set<double>(lambdas.begin(), lambdas.end()).size() != lambdas.size())
    throw ValidationError("lambda values must be distinct");
  for (double l : lambdas) {
    reward::RewardWeights w = reward.weights;
    w.lambda = l;
    w.validate();
  }

  const RowRun run = run_row(cases, config, clients, base_store, kb, account);
  std::vector<SampleResult> ignored;
  const MetricScores metrics = judge_row(cases, run, clients, options.judge_metrics, ignored);

  std::vector<std::optional<reward::RolloutSample>> rollouts;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!run.traces[i] || !cases[i].reference_answer) {
      rollouts.emplace_back();
      continue;
    }
    const auto& t = *run.traces[i];
    reward::RolloutSample s;
    s.sample_id = cases[i].case_id;
    s.rewritten_query = t.retrieval_query;
    s.predicted_answer = t.response;
    s.reference_answer = *cases[i].reference_answer;
    for (const auto& g : t.golden) s.retrieved_contents.push_back(g.text);
    s.annotated_rewrite = cases[i].annotated_rewrite;
    rollouts.push_back(std::move(s));
  }

  std::vector<LambdaRow> rows;
  for (double l : lambdas) {
    LambdaRow row;
    row.lambda = l;
    row.metrics = metrics;
    reward::RewardConfig rc = reward;
    rc.weights.lambda = l;
    double fused = 0.0, hser = 0.0, sser = 0.0;
    std::size_t n_sser = 0;
    for (const auto& r : rollouts) {
      if (!r || (l > 0.0 && !r->annotated_rewrite)) {
        ++row.skipped;
        continue;
      }
      reward::RewardBreakdown b;
      try {
        b = reward::score_sample(*r, rc);
      } catch (const ValidationError&) {
        ++row.skipped;
        continue;
      }
      ++row.n;
      fused += b.fused;
      hser += b.hser;
      if (b.sser) {
        sser += *b.sser;
        ++n_sser;
      }
    }
    if (row.n > 0) {
      row.mean_fused = fused / static_cast<double>(row.n);
      row.mean_hser = hser / static_cast<double>(row.n);
    }
    if (n_sser > 0) row.mean_sser = sser / static_cast<double>(n_sser);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- reports -------------------------------------------------------------

json published_reference() {
  return {{"note", "published figures obtained with production models and a model judge; recorded for "
                   "comparison, never asserted"},
          {"rows", json::array({{{"label", "w/o history + RAG"}, {"ca", 20.24}, {"qa", 70.52}},
                                {{"label", "RL_Rewriter + RAG_attn (HSER)"}, {"ca", 55.55}, {"qa", 90.93}}})}};
}

namespace {

std::string fixed4(std::optional<double> v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json opt_json(std::optional<double> v) { return v ? json(*v) : json(nullptr); }
json opt_json(std::optional<int> v) { return v ? json(*v) : json(nullptr); }

json metrics_json(const MetricScores& m) {
  return {{"ca", opt_json(m.ca)},         {"qa", opt_json(m.qa)},           {"qr", opt_json(m.qr)},
          {"n_samples", m.n_samples},     {"dropped_ca", m.dropped_ca},     {"dropped_qa", m.dropped_qa},
          {"dropped_qr", m.dropped_qr}};
}

std::string slug(const std::string& label) {
  std::string out;
  for (unsigned char c : label) {
    if (std::isalnum(c)) out += static_cast<char>(std::tolower(c));
    else if (!out.empty() && out.back() != '-') out += '-';
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? "row" : out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw StoreUnavailableError("cannot write " + path.string());
}

}  // namespace

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "label,stm_enabled,ltm_enabled,include_history,n_samples,ca,qa,qr,retrieval_hit_rate,dropped,failures\n";
  for (const auto& r : rows) {
    const auto& c = r.config;
    out += csv_field(r.label) + ',' + (c.stm_enabled ? "1" : "0") + ',' + (c.ltm_enabled ? "1" : "0") + ',' +
           (c.include_history_in_retrieval ? "1" : "0") + ',' + std::to_string(r.metrics.n_samples) + ',' +
           fixed4(r.metrics.ca) + ',' + fixed4(r.metrics.qa) + ',' + fixed4(r.metrics.qr) + ',' +
           fixed4(r.retrieval_hit_rate) + ',' +
           std::to_string(r.metrics.dropped_ca + r.metrics.dropped_qa + r.metrics.dropped_qr) + ',' +
           std::to_string(r.failures) + '\n';
  }
  return out;
}

json ablation_json(std::span<const AblationRow> rows, const EvalOptions& options) {
  json out{{"schema", "himes-eval/1"}, {"kind", "ablation"}, {"seed", options.seed},
           {"published_reference", published_reference()}};
  out["rows"] = json::array();
  for (const auto& r : rows) {
    json samples = json::array();
    for (const auto& s : r.samples) {
      json js{{"case_id", s.case_id}, {"ca", opt_json(s.ca)}, {"qa", opt_json(s.qa)}, {"qr", opt_json(s.qr)},
              {"gold_hit", opt_json(s.gold_hit)}};
      js["error"] = s.error ? json(*s.error) : json(nullptr);
      samples.push_back(std::move(js));
    }
    json row{{"label", r.label},
             {"config", pipeline::to_json(r.config)},
             {"metrics", metrics_json(r.metrics)},
             {"retrieval_hit_rate", opt_json(r.retrieval_hit_rate)},
             {"failures", r.failures},
             {"samples", samples}};
    row["error"] = r.error ? json(*r.error) : json(nullptr);
    out["rows"].push_back(std::move(row));
  }
  return out;
}

std::string lambda_csv(std::span<const LambdaRow> rows) {
  std::string out = "lambda,n,skipped,mean_fused,mean_hser,mean_sser,ca,qa,qr\n";
  for (const auto& r : rows) {
    out += fixed4(r.lambda) + ',' + std::to_string(r.n) + ',' + std::to_string(r.skipped) + ',' +
           fixed4(r.mean_fused) + ',' + fixed4(r.mean_hser) + ',' + fixed4(r.mean_sser) + ',' + fixed4(r.metrics.ca) +
           ',' + fixed4(r.metrics.qa) + ',' + fixed4(r.metrics.qr) + '\n';
  }
  return out;
}

json lambda_json(std::span<const LambdaRow> rows, const EvalOptions& options) {
  json out{{"schema", "himes-eval/1"}, {"kind", "lambda_sweep"}, {"seed", options.seed}};
  out["rows"] = json::array();
  for (const auto& r : rows)
    out["rows"].push_back({{"lambda", r.lambda},
                           {"n", r.n},
                           {"skipped", r.skipped},
                           {"mean_fused", opt_json(r.mean_fused)},
                           {"mean_hser", opt_json(r.mean_hser)},
                           {"mean_sser", opt_json(r.mean_sser)},
                           {"metrics", metrics_json(r.metrics)}});
  return out;
}

void write_ablation_report(const fs::path& dir, std::span<const AblationRow> rows, const EvalOptions& options) {
  fs::create_directories(dir / "traces");
  write_file(dir / "ablation.csv", ablation_csv(rows));
  write_file(dir / "ablation.json", ablation_json(rows, options).dump(2) + "\n");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "%02zu-", i);
    std::string lines;
    for (const auto& t : rows[i].traces) lines += pipeline::to_json(t).dump() + "\n";
    write_file(dir / "traces" / (prefix + slug(rows[i].label) + ".jsonl"), lines);
  }
}

void write_lambda_report(const fs::path& dir, std::span<const LambdaRow> rows, const EvalOptions& options) {
  fs::create_directories(dir);
  write_file(dir / "lambda_sweep.csv", lambda_csv(rows));
  write_file(dir / "lambda_sweep.json", lambda_json(rows, options).dump(2) + "\n");
}

}  // namespace himes::eval
