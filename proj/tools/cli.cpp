#include "himes/cli/cli.hpp"

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "himes/core/errors.hpp"
#include "himes/datagen/datagen.hpp"
#include "himes/eval/eval.hpp"
#include "himes/memory/rar.hpp"
#include "himes/pipeline/pipeline.hpp"
#include "himes/reward/reward.hpp"
#include "himes/service/config.hpp"
#include "himes/service/http_service.hpp"

namespace himes::cli {

using nlohmann::json;

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path);
  return in;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
}

std::vector<double> parse_lambdas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ValidationError("bad lambda value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// Shared options: config file, explicit key overrides and flags that map to
// config keys. Flags beat the environment, which beats the file.
struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> mapped;

  service::ServiceConfig load() const {
    std::map<std::string, std::string> overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects section.key=value, got '" + s + "'");
      overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    for (const auto& [k, v] : mapped) overrides[k] = v;
    std::optional<std::filesystem::path> path;
    if (!file.empty()) path = file;
    return service::load_service_config(path, service::process_env, overrides);
  }
};

void add_config_flags(CLI::App& sub, ConfigFlags& flags) {
  sub.add_option("-c,--config", flags.file, "INI config file")->check(CLI::ExistingFile);
  sub.add_option("--set", flags.sets, "Override a config key: section.key=value");
}

// Registers a flag whose value, when given, overrides one config key.
void map_option(CLI::App& sub, ConfigFlags& flags, const std::string& name, const std::string& key,
                const std::string& help) {
  sub.add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags.mapped[key] = v; }, help);
}

memory::TopicTaxonomy load_taxonomy(const service::ServiceConfig& config) {
  return config.taxonomy_path.empty() ? memory::TopicTaxonomy::shipped_default()
                                      : memory::TopicTaxonomy::from_file(config.taxonomy_path);
}

pipeline::KnowledgeBase load_kb(const service::ServiceConfig& config, clients::EmbedderClient& embedder) {
  if (config.kb_path.empty()) throw ValidationError("a knowledge base is required (--kb or kb.path)");
  std::optional<std::filesystem::path> cache;
  if (!config.kb_cache.empty()) cache = config.kb_cache;
  return pipeline::KnowledgeBase::load_jsonl(config.kb_path, embedder, cache);
}

// ---- subcommands ---------------------------------------------------------

int cmd_ingest(const ConfigFlags& flags, std::ostream& out) {
  const auto config = flags.load();
  if (config.kb_cache.empty()) throw ValidationError("ingest needs a cache path (--cache or kb.cache)");
  auto clients = service::make_clients(config);
  const auto kb = load_kb(config, *clients.embedder);
  out << json{{"documents", kb.size()},
              {"embedded", kb.embedded_on_load()},
              {"reused", kb.size() - kb.embedded_on_load()},
              {"embedder", kb.embedder_identity()},
              {"cache", config.kb_cache.string()}}
             .dump()
      << '\n';
  return kExitOk;
}

struct DatagenFlags {
  std::string sources, out_dir, tasks;
  std::optional<std::size_t> max_turns, solve_after, finish_after;
  bool quality = false, annotate = false;
};

int cmd_datagen(const ConfigFlags& flags, const DatagenFlags& d, std::ostream& out) {
  const auto config = flags.load();
  auto in = open_input(d.sources);
  const auto sources = datagen::read_sources(in);
  const auto catalog = d.tasks.empty() ? datagen::RewriteTaskCatalog::shipped_default()
                                       : datagen::RewriteTaskCatalog::from_json(json::parse(open_input(d.tasks)));

  auto bundle = service::make_clients(config);
  std::unique_ptr<clients::ChatClient> stub_user, stub_agent;
  datagen::DatagenClients clients;
  if (config.mode == service::ClientMode::stub) {
    stub_user = std::make_unique<datagen::StubUserAgent>(d.solve_after);
    stub_agent = std::make_unique<datagen::StubAccountAgent>(d.finish_after);
    clients.user = stub_user.get();
    clients.agent = stub_agent.get();
  } else {
    // Both simulated parties share the general chat endpoint.
    clients.user = bundle.responder.get();
    clients.agent = bundle.responder.get();
  }
  if (d.annotate) clients.annotator = bundle.rewriter.get();
  clients.judge = bundle.judge.get();

  datagen::DatagenOptions options;
  options.seed = config.seed;
  options.parallelism = config.parallelism;
  options.quality_pass = d.quality;
  if (d.max_turns) options.max_turns = *d.max_turns;
  const auto result = datagen::run_datagen(sources, clients, catalog, options);

  const std::filesystem::path dir = d.out_dir;
  std::filesystem::create_directories(dir);
  std::vector<json> rows;
  for (const auto& b : result.blueprints) rows.push_back(datagen::to_json(b));
  write_jsonl(dir / "blueprints.jsonl", rows);
  rows.clear();
  for (std::size_t i = 0; i < result.transcripts.size(); ++i) {
    auto t = datagen::to_json(result.transcripts[i]);
    if (!result.quality.empty()) t["quality"] = result.quality[i] ? json(*result.quality[i]) : json(nullptr);
    rows.push_back(std::move(t));
  }
  write_jsonl(dir / "transcripts.jsonl", rows);
  rows.clear();
  for (const auto& s : result.samples) rows.push_back(datagen::to_json(s));
  write_jsonl(dir / "samples.jsonl", rows);

  out << json{{"sources", sources.size()},
              {"blueprints", result.blueprints.size()},
              {"selected", result.selected.size()},
              {"samples", result.samples.size()},
              {"out", dir.string()}}
             .dump()
      << '\n';
  return kExitOk;
}

struct EvalFlags {
  std::string test_set, grid, out_dir, lambdas;
  bool no_judge = false;
};

int cmd_eval(const ConfigFlags& flags, const EvalFlags& e, std::ostream& out) {
  const auto config = flags.load();
  auto in = open_input(e.test_set);
  const auto cases = eval::read_test_set(in);
  const auto grid = e.grid.empty() ? eval::default_grid() : eval::grid_from_json(json::parse(open_input(e.grid)), config.pipeline);

  auto bundle = service::make_clients(config);
  const auto kb = load_kb(config, *bundle.embedder);
  const memory::MemoryStore base(load_taxonomy(config), config.dimension);
  const eval::EvalClients clients{bundle.rewriter.get(), bundle.responder.get(), bundle.embedder.get(),
                                  bundle.classifier.get(), bundle.judge.get()};
  eval::EvalOptions options;
  options.seed = config.seed;
  options.judge_metrics = !e.no_judge;

  const std::filesystem::path dir = e.out_dir;
  const auto rows = eval::run_ablation(cases, grid, clients, base, kb, config.account, options);
  eval::write_ablation_report(dir, rows, options);
  out << eval::ablation_csv(rows);

  if (!e.lambdas.empty()) {
    const auto lambdas = parse_lambdas(e.lambdas);
    reward::RewardConfig rc;
    rc.weights = config.pipeline.reward_weights;
    rc.embedder = bundle.embedder.get();
    const auto sweep =
        eval::lambda_sweep(cases, lambdas, config.pipeline, clients, base, kb, config.account, rc, options);
    eval::write_lambda_report(dir, sweep, options);
    out << eval::lambda_csv(sweep);
  }
  for (const auto& r : rows)
    if (r.error) throw ValidationError("row '" + r.label + "' did not run: " + *r.error);
  return kExitOk;
}

int cmd_rar(const ConfigFlags& flags, const std::string& sessions_path, double tau, std::ostream& out) {
  const auto config = flags.load();
  auto in = open_input(sessions_path);
  const auto sessions = memory::read_sessions(in);
  auto bundle = service::make_clients(config);
  const auto r = memory::repeated_asking_rate(sessions, *bundle.embedder, tau);
  out << json{{"rar", r.rate}, {"repeated", r.repeated}, {"total", r.total}, {"tau", tau}}.dump() << '\n';
  return kExitOk;
}

struct RewardFlags {
  std::string rollouts, out_file, hit_mode = "coverage", sser_mode = "rouge-l";
  double hit_threshold = 0.8;
  std::optional<std::size_t> group_size;
};

int cmd_reward(const ConfigFlags& flags, const RewardFlags& r, std::ostream& out) {
  const auto config = flags.load();
  auto in = open_input(r.rollouts);
  const auto samples = reward::read_rollouts(in);

  reward::RewardConfig rc;
  rc.weights = config.pipeline.reward_weights;
  rc.hit_threshold = r.hit_threshold;
  rc.hit_mode = r.hit_mode == "substring" ? reward::HitMode::substring : reward::HitMode::coverage;
  std::unique_ptr<clients::EmbedderClient> embedder;
  if (r.sser_mode == "embedding") {
    rc.sser_mode = reward::SserMode::embedding_cosine;
    embedder = std::move(service::make_clients(config).embedder);
    rc.embedder = embedder.get();
  }
  const auto breakdowns = reward::score_batch(samples, rc);

  std::vector<double> advantages;
  if (r.group_size) {
    std::vector<double> fused;
    for (const auto& b : breakdowns) fused.push_back(b.fused);
    advantages = reward::group_relative_advantages(fused, *r.group_size);
  }

  std::ofstream file;
  if (!r.out_file.empty()) {
    file.open(r.out_file);
    if (!file) throw ValidationError("cannot write " + r.out_file);
  }
  std::ostream& sink = r.out_file.empty() ? out : file;
  for (std::size_t i = 0; i < breakdowns.size(); ++i) {
    json row = reward::to_json(breakdowns[i]);
    if (samples[i].sample_id) row["sample_id"] = *samples[i].sample_id;
    if (!advantages.empty()) row["advantage"] = advantages[i];
    sink << row.dump() << '\n';
  }
  return kExitOk;
}

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const ConfigFlags& flags, std::ostream& out) {
  const auto config = flags.load();
  auto app = service::ServiceApp::from_config(config);
  service::HttpServer server(*app);
  const int port = server.bind(config.host, config.port);
  out << "listening on " << config.host << ':' << port << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.run();
  g_server = nullptr;
  return kExitOk;
}

void print_issues(const ValidationError& e, std::ostream& err) {
  err << "error: " << e.what() << '\n';
  for (const auto& issue : e.issues())
    if (issue != e.what()) err << "  - " << issue << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"himes: memory-augmented retrieval middleware", "himes"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  ConfigFlags ingest_cfg, datagen_cfg, eval_cfg, rar_cfg, reward_cfg, serve_cfg;

  auto* ingest = app.add_subcommand("ingest", "Embed a knowledge-base JSONL and write its vector cache");
  add_config_flags(*ingest, ingest_cfg);
  map_option(*ingest, ingest_cfg, "--kb", "kb.path", "Knowledge base JSONL");
  map_option(*ingest, ingest_cfg, "--cache", "kb.cache", "Embedding cache file");

  DatagenFlags dflags;
  auto* dg = app.add_subcommand("datagen", "Simulate dialogues from source personas");
  add_config_flags(*dg, datagen_cfg);
  dg->add_option("--sources", dflags.sources, "Source dialogues JSONL")->required()->check(CLI::ExistingFile);
  dg->add_option("--out", dflags.out_dir, "Output directory")->required();
  dg->add_option("--tasks", dflags.tasks, "Rewrite task catalog JSON")->check(CLI::ExistingFile);
  dg->add_option("--max-turns", dflags.max_turns, "Turn cap per dialogue")->check(CLI::PositiveNumber);
  dg->add_option("--stub-solve-after", dflags.solve_after, "Stub user marks itself solved after k replies");
  dg->add_option("--stub-finish-after", dflags.finish_after, "Stub account ends on its k-th reply");
  dg->add_flag("--quality", dflags.quality, "Score transcripts and keep the top quartile");
  dg->add_flag("--annotate", dflags.annotate, "Annotate rewrite samples with the rewriter");
  map_option(*dg, datagen_cfg, "--seed", "clients.seed", "Blueprint seed");

  EvalFlags eflags;
  auto* ev = app.add_subcommand("eval", "Run an ablation grid (and optional lambda sweep) over a test set");
  add_config_flags(*ev, eval_cfg);
  ev->add_option("--test-set", eflags.test_set, "Test set JSONL")->required()->check(CLI::ExistingFile);
  ev->add_option("--grid", eflags.grid, "Ablation grid JSON")->check(CLI::ExistingFile);
  ev->add_option("--out", eflags.out_dir, "Report directory")->required();
  ev->add_option("--lambdas", eflags.lambdas, "Comma-separated lambda values for a reward sweep");
  ev->add_flag("--no-judge", eflags.no_judge, "Skip judge metrics");
  map_option(*ev, eval_cfg, "--kb", "kb.path", "Knowledge base JSONL");
  map_option(*ev, eval_cfg, "--seed", "clients.seed", "Run seed");

  std::string sessions;
  double tau = 0.9;
  auto* rar = app.add_subcommand("rar", "Repeated asking rate over user sessions");
  add_config_flags(*rar, rar_cfg);
  rar->add_option("--sessions", sessions, "Sessions JSONL")->required()->check(CLI::ExistingFile);
  rar->add_option("--tau", tau, "Similarity threshold")->check(CLI::Range(0.0, 1.0));

  RewardFlags rflags;
  auto* rw = app.add_subcommand("reward", "Score rollouts into reward breakdowns");
  add_config_flags(*rw, reward_cfg);
  rw->add_option("--rollouts", rflags.rollouts, "Rollout JSONL")->required()->check(CLI::ExistingFile);
  rw->add_option("--out", rflags.out_file, "Output JSONL (default stdout)");
  rw->add_option("--hit-mode", rflags.hit_mode, "coverage or substring")
      ->check(CLI::IsMember({"coverage", "substring"}));
  rw->add_option("--hit-threshold", rflags.hit_threshold, "Coverage threshold")->check(CLI::Range(0.0, 1.0));
  rw->add_option("--sser-mode", rflags.sser_mode, "rouge-l or embedding")->check(CLI::IsMember({"rouge-l", "embedding"}));
  rw->add_option("--group-size", rflags.group_size, "Add group-relative advantages over groups of this size");
  map_option(*rw, reward_cfg, "--alpha", "reward.alpha", "EM weight");
  map_option(*rw, reward_cfg, "--beta", "reward.beta", "Hit weight");
  map_option(*rw, reward_cfg, "--lambda", "reward.lambda", "Semantic reward weight");

  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  add_config_flags(*serve, serve_cfg);
  map_option(*serve, serve_cfg, "--host", "server.host", "Listen address");
  map_option(*serve, serve_cfg, "--port", "server.port", "Listen port (0 picks one)");
  map_option(*serve, serve_cfg, "--store", "store.path", "Memory store directory");
  map_option(*serve, serve_cfg, "--kb", "kb.path", "Knowledge base JSONL");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(ingest_cfg, out);
    if (dg->parsed()) return cmd_datagen(datagen_cfg, dflags, out);
    if (ev->parsed()) return cmd_eval(eval_cfg, eflags, out);
    if (rar->parsed()) return cmd_rar(rar_cfg, sessions, tau, out);
    if (rw->parsed()) return cmd_reward(reward_cfg, rflags, out);
    if (serve->parsed()) return cmd_serve(serve_cfg, out);
  } catch (const pipeline::StageError& e) {
    err << "error in stage " << e.stage() << ": " << e.what() << '\n';
    return e.cause() == pipeline::StageError::Cause::transport ? kExitTransport : kExitValidation;
  } catch (const TransportError& e) {
    err << "transport error: " << e.what() << '\n';
    return kExitTransport;
  } catch (const ValidationError& e) {
    print_issues(e, err);
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace himes::cli
