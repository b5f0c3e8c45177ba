// Acceptance gate: one PASS/FAIL line per criterion. Thresholds are fixed
// here; a failing criterion makes the binary exit non-zero.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "himes/cli/cli.hpp"
#include "himes/clients/stubs.hpp"
#include "himes/core/rouge.hpp"
#include "himes/datagen/datagen.hpp"
#include "himes/eval/eval.hpp"
#include "himes/memory/classifier.hpp"
#include "himes/memory/rar.hpp"
#include "himes/memory/store.hpp"
#include "himes/rerank/rerank.hpp"
#include "himes/reward/reward.hpp"
#include "himes/service/http_service.hpp"

#include "../support/oracles.hpp"
#include "coref_corpus.hpp"

using namespace himes;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t max_len) {
  static const char* vocab[] = {"a", "b", "c", "d", "e"};
  std::uniform_int_distribution<std::size_t> len(0, max_len), pick(0, 4);
  std::vector<std::string> out(len(rng));
  for (auto& t : out) t = vocab[pick(rng)];
  return out;
}

// ---- 1 -------------------------------------------------------------------
Outcome rouge_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_tokens(rng, 10), b = random_tokens(rng, 10);
    const double got = core::rouge_l_f1(core::TokenSequence(a), core::TokenSequence(b));
    worst = std::max(worst, std::abs(got - testkit::brute_force_rouge_l(a, b)));
  }
  const double s = seconds_since(t0);
  return {worst <= 1e-12 && s < 10.0, "max |diff| " + fmt("%.3g", worst) + ", " + fmt("%.2f", s) + " s"};
}

// ---- 2 -------------------------------------------------------------------
Outcome hser_formula() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  int bad = 0;
  for (int i = 0; i < 200; ++i) {
    const double f1 = u(rng), a = u(rng), b = u(rng);
    const int em = coin(rng), h = coin(rng);
    const reward::RewardWeights w{a, b, 0.0};
    if (reward::combine_hser(f1, em, h, w) != f1 + a * em + b * h) ++bad;

    // Through the sample path: the breakdown's own parts must fuse the same way.
    const auto pred = random_tokens(rng, 6), ref = random_tokens(rng, 6);
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& t : v) s += t + " ";
      return s + "z";
    };
    reward::RolloutSample sample;
    sample.predicted_answer = join(pred);
    sample.reference_answer = join(ref);
    sample.retrieved_contents = {coin(rng) ? sample.predicted_answer : std::string("q r s")};
    const auto bd = reward::hser(sample, w);
    if (bd.hser != bd.f1_h + a * bd.em_h + b * bd.hit) ++bad;
  }
  reward::RolloutSample perfect{std::nullopt, "", "same words here", "same words here", {"same words here"}, {}};
  const double extreme = reward::hser(perfect, reward::RewardWeights{0.5, 0.5, 0.0}).hser;
  return {bad == 0 && extreme == 2.0, std::to_string(bad) + " mismatches, (1,1,1) → " + fmt("%.17g", extreme)};
}

// ---- 3 -------------------------------------------------------------------
Outcome fusion_affine() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.0, 2.0), l(0.01, 1.0);
  int bad_zero = 0;
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    reward::RewardBreakdown b;
    b.hser = u(rng);
    b.sser = u(rng) / 2.0;
    if (reward::fused_reward(b, {0.5, 0.5, 0.0}) != b.hser) ++bad_zero;
    const double l1 = l(rng), l2 = l1 + l(rng), l3 = l2 + l(rng);
    const double f1 = reward::fused_reward(b, {0.5, 0.5, l1});
    const double f2 = reward::fused_reward(b, {0.5, 0.5, l2});
    const double f3 = reward::fused_reward(b, {0.5, 0.5, l3});
    // Collinear points: the area of the triangle they span vanishes.
    worst = std::max(worst, std::abs((l2 - l1) * (f3 - f1) - (l3 - l1) * (f2 - f1)));
  }
  return {bad_zero == 0 && worst <= 1e-12,
          std::to_string(bad_zero) + " λ=0 mismatches, max collinearity residual " + fmt("%.3g", worst)};
}

// ---- 4 and 5 -------------------------------------------------------------
struct RerankInstance {
  std::vector<rerank::RetrievedDocument> docs;
  std::vector<std::vector<double>> chunk_vectors;
  std::vector<memory::MemoryRecord> history;
  std::vector<std::vector<double>> history_vectors;
  std::map<std::string, std::vector<double>> table;
  std::size_t k = 1;
};

RerankInstance random_rerank_instance(std::mt19937_64& rng, std::size_t dim) {
  RerankInstance in;
  std::uniform_int_distribution<std::size_t> nchunks(1, 10), nhist(1, 5);
  const std::size_t c = nchunks(rng), h = nhist(rng);
  std::bernoulli_distribution dup(0.25);
  for (std::size_t i = 0; i < c; ++i) {
    // Single-chunk documents; ids shuffled so tie-breaks are exercised.
    rerank::RetrievedDocument d{"d" + std::to_string((i * 7 + 3) % 11), "", "body " + std::to_string(i)};
    auto v = (i > 0 && dup(rng)) ? in.chunk_vectors[i - 1] : testkit::random_vector(rng, dim);
    in.table[d.body] = v;
    in.chunk_vectors.push_back(v);
    in.docs.push_back(std::move(d));
  }
  for (std::size_t j = 0; j < h; ++j) {
    auto v = testkit::random_vector(rng, dim);
    memory::MemoryRecord r;
    r.id = {j + 1};
    r.query_text = "h" + std::to_string(j);
    r.embedding = core::EmbeddingVector(v);
    in.history.push_back(std::move(r));
    in.history_vectors.push_back(std::move(v));
  }
  in.k = std::uniform_int_distribution<std::size_t>(1, c + 2)(rng);
  return in;
}

std::vector<std::pair<std::string, std::size_t>> order_of(const rerank::RerankResult& r) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& c : r.chunks) out.emplace_back(c.chunk.doc_id, c.chunk.chunk_index);
  return out;
}

Outcome rerank_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(404);
  const std::size_t dim = 8;
  int bad = 0;
  for (int i = 0; i < 500; ++i) {
    auto in = random_rerank_instance(rng, dim);
    testkit::TableEmbedder emb(dim, in.table);
    std::vector<testkit::OracleChunk> keys;
    for (const auto& d : in.docs) keys.push_back({d.doc_id, 0, 0.0});
    const auto expect = testkit::score_and_sort(keys, in.chunk_vectors, in.history_vectors, in.k);
    for (auto exec : {kernels::Execution::serial, kernels::Execution::parallel}) {
      rerank::RerankOptions opt;
      opt.execution = exec;
      const auto got = rerank::rerank_top_k(in.docs, in.history, in.k, {}, emb, opt);
      bool same = got.chunks.size() == expect.size();
      for (std::size_t j = 0; same && j < expect.size(); ++j)
        same = got.chunks[j].chunk.doc_id == expect[j].doc_id && got.chunks[j].chunk.chunk_index == expect[j].chunk_index &&
               std::abs(got.chunks[j].score - expect[j].score) <= 1e-12;
      if (!same) ++bad;
    }
  }
  const double s = seconds_since(t0);
  return {bad == 0 && s < 30.0, std::to_string(bad) + " mismatching runs of 1000, " + fmt("%.2f", s) + " s"};
}

Outcome rerank_scale_invariance() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  const std::size_t dim = 8;
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    auto in = random_rerank_instance(rng, dim);
    testkit::TableEmbedder emb(dim, in.table);
    const auto before = order_of(rerank::rerank_top_k(in.docs, in.history, in.k, {}, emb));
    const double s = scale(rng);
    for (auto& r : in.history) {
      std::vector<double> v(r.embedding.values().begin(), r.embedding.values().end());
      for (auto& x : v) x *= s;
      r.embedding = core::EmbeddingVector(v);
    }
    if (order_of(rerank::rerank_top_k(in.docs, in.history, in.k, {}, emb)) != before) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " order changes in 100 instances"};
}

// ---- 6 -------------------------------------------------------------------
Outcome partition_recall() {
  std::mt19937_64 rng(606);
  const auto taxonomy = memory::TopicTaxonomy::shipped_default();
  const auto all_keys = taxonomy.partitions();
  const std::size_t dim = 6;
  int bad_sets = 0, bad_sizes = 0, size_checks = 0;
  for (int i = 0; i < 100; ++i) {
    memory::MemoryStore store(taxonomy, dim);
    std::uniform_int_distribution<std::size_t> nrec(1, 200), nkeys(1, 5), users(0, 2);
    std::vector<memory::PartitionKey> keys;
    const std::size_t nk = nkeys(rng);
    for (std::size_t j = 0; j < nk; ++j)
      keys.push_back(all_keys[std::uniform_int_distribution<std::size_t>(0, all_keys.size() - 1)(rng)]);
    std::uniform_int_distribution<std::size_t> kpick(0, keys.size() - 1);
    const std::size_t n = nrec(rng);
    for (std::size_t j = 0; j < n; ++j)
      store.store_query("u" + std::to_string(users(rng)), "q" + std::to_string(j), keys[kpick(rng)],
                        core::EmbeddingVector::normalized(testkit::random_vector(rng, dim)), core::Timestamp{});

    const core::EmbeddingVector query(testkit::random_vector(rng, dim));
    const auto global = store.recall_top_n("u0", query, n, memory::RecallScope::global());
    std::set<memory::PartitionKey> populated(keys.begin(), keys.end());
    for (const auto& key : populated) {
      std::set<std::uint64_t> expect, got;
      for (const auto& r : global)
        if (r.record.partition == key) expect.insert(r.record.id.value);
      for (const auto& r : store.recall_top_n("u0", query, n, memory::RecallScope::partition(key)))
        got.insert(r.record.id.value);
      if (got != expect) ++bad_sets;
    }
    // Count partitions that actually received records.
    std::set<memory::PartitionKey> used;
    for (const auto& u : {"u0", "u1", "u2"})
      for (const auto& r : store.records_for_user(u)) used.insert(r.partition);
    if (used.size() >= 2) {
      const auto global_size = store.candidate_set_size(memory::RecallScope::global());
      for (const auto& key : used) {
        ++size_checks;
        if (store.candidate_set_size(memory::RecallScope::partition(key)) >= global_size) ++bad_sizes;
      }
    }
  }
  return {bad_sets == 0 && bad_sizes == 0 && size_checks > 0,
          std::to_string(bad_sets) + " set mismatches, " + std::to_string(bad_sizes) + "/" +
              std::to_string(size_checks) + " candidate-size violations"};
}

// ---- 7 -------------------------------------------------------------------
Outcome grpo_normalization() {
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_int_distribution<std::size_t> gsize(2, 16);
  double worst_mean = 0.0, worst_std = 0.0;
  int groups = 0;
  while (groups < 200) {
    const std::size_t g = gsize(rng);
    std::vector<double> r(g);
    for (auto& x : r) x = u(rng);
    double m = 0, v = 0;
    for (double x : r) m += x;
    m /= g;
    for (double x : r) v += (x - m) * (x - m);
    if (std::sqrt(v / g) <= reward::kAdvantageStdFloor) continue;
    ++groups;
    const auto a = reward::group_relative_advantages(r, g);
    double am = 0, av = 0;
    for (double x : a) am += x;
    am /= g;
    for (double x : a) av += (x - am) * (x - am);
    worst_mean = std::max(worst_mean, std::abs(am));
    worst_std = std::max(worst_std, std::abs(std::sqrt(av / g) - 1.0));
  }
  const std::vector<double> constant(8, 0.7);
  bool zeros = true;
  for (double x : reward::group_relative_advantages(constant, 4)) zeros = zeros && x == 0.0;
  return {worst_mean <= 1e-9 && worst_std <= 1e-6 && zeros,
          "max |mean| " + fmt("%.3g", worst_mean) + ", max |std-1| " + fmt("%.3g", worst_std) +
              (zeros ? ", constant → 0" : ", constant group not zero")};
}

// ---- 8 -------------------------------------------------------------------
Outcome coref_ablation() {
  const auto t0 = Clock::now();
  auto corpus = testkit::coref_corpus();
  clients::HashingEmbedder embedder(256, 0);
  pipeline::KnowledgeBase kb(corpus.docs, embedder);
  clients::LookupChatClient rewriter(corpus.rewrites, "{\"query_rewrited\": \"\"}");
  clients::ExtractiveResponder responder;
  memory::LexicalClassifier classifier;
  const memory::MemoryStore store(memory::TopicTaxonomy::shipped_default(), 256);

  pipeline::PipelineConfig base;
  base.top_r = 1;
  base.ltm_enabled = false;
  base.include_history_in_retrieval = false;
  auto with_stm = base, without = base;
  with_stm.stm_enabled = true;
  without.stm_enabled = false;
  const std::vector<eval::AblationSpec> grid{{"Rewriter + RAG", with_stm}, {"w/o history + RAG", without}};
  eval::EvalOptions options;
  options.judge_metrics = false;
  const auto rows = eval::run_ablation(corpus.cases, grid, {&rewriter, &responder, &embedder, &classifier, nullptr},
                                       store, kb, {}, options);
  const double on = rows[0].retrieval_hit_rate.value_or(-1), off = rows[1].retrieval_hit_rate.value_or(-1);
  const double s = seconds_since(t0);
  return {on == 1.0 && off == 0.0 && s < 5.0,
          "hit rate stm on " + fmt("%.2f", on) + ", off " + fmt("%.2f", off) + ", " + fmt("%.2f", s) + " s"};
}

// ---- 9 -------------------------------------------------------------------
Outcome rar_hand_count() {
  clients::HashingEmbedder embedder(256, 0);
  auto rate = [&](const char* name) {
    std::ifstream in(testkit::fixture(name));
    const auto sessions = memory::read_sessions(in);
    return memory::repeated_asking_rate(sessions, embedder, 0.9).rate;
  };
  const double repeat = rate("rar_sessions.jsonl"), none = rate("rar_no_repeat.jsonl");
  return {repeat == 0.8 && none == 0.0, "fixture " + fmt("%.17g", repeat) + ", no-repeat " + fmt("%.17g", none)};
}

// ---- 10 ------------------------------------------------------------------
Outcome taxonomy_fidelity() {
  // Reference table, category then its four subtopics, in published order.
  static const std::vector<std::vector<std::string>> expected = {
      {"Greetings & Self-introduction", "Greeting forms", "Self-introduction structure", "Cultural taboos", "Context adaptation"},
      {"Interpersonal Relationships", "Relationship building", "Conflict resolution", "Boundary setting", "Digital etiquette"},
      {"Etiquette & Cultural Differences", "Dining etiquette", "Business protocols", "Holiday customs", "Body language"},
      {"Travel", "Itinerary planning", "Transportation methods", "Accommodation types", "Cultural experiences"},
      {"Dining", "Cuisine types", "Ordering techniques", "Food culture", "Special dietary needs"},
      {"Shopping", "Payment methods", "Product inquiries", "Return policies", "Specialty markets"},
      {"Health", "Symptom description", "Medical procedures", "Fitness communication", "Psychological support"},
      {"Movies & Music", "Genre preferences", "Work recommendations", "Event information", "Thematic analysis"},
      {"Books & Learning", "Reading methods", "Study strategies", "Resource acquisition", "Knowledge application"},
      {"Technology & Innovation", "Product evaluation", "Tech ethics", "Innovation cases", "Future trends"},
      {"History & Culture", "Civilization comparison", "Historical events", "Cultural heritage", "Figure analysis"},
      {"Emotional Communication", "Emotion recognition", "Empathy expression", "Intimate relationships", "Personal growth"},
      {"Opinion Expression", "Argument structure", "Persuasion techniques", "Debate methods", "Cultural variations"},
      {"Directions & Navigation", "Landmark orientation", "Transport options", "Emergency handling", "Digital tools"},
      {"Time & Planning", "Schedule management", "Punctuality norms", "Long-term planning", "Efficiency techniques"},
      {"Weather & Environment", "Climate characteristics", "Eco-issues", "Disaster response", "Outdoor guidelines"},
  };
  const auto t = memory::TopicTaxonomy::from_file(std::filesystem::path(HIMES_DATA_DIR) / "taxonomy.json");
  bool match = t.categories().size() == expected.size();
  for (std::size_t i = 0; match && i < expected.size(); ++i) {
    const auto& c = t.categories()[i];
    match = c.name == expected[i][0] && c.subtopics == std::vector<std::string>(expected[i].begin() + 1, expected[i].end());
  }
  const bool shipped_same = memory::TopicTaxonomy::shipped_default().to_json() == t.to_json();
  return {match && t.pair_count() == 64 && shipped_same,
          std::to_string(t.categories().size()) + " categories, " + std::to_string(t.pair_count()) + " pairs" +
              (match ? ", strings verbatim" : ", strings differ") + (shipped_same ? "" : ", embedded copy differs")};
}

// ---- 11 ------------------------------------------------------------------
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome eval_determinism() {
  const auto root = std::filesystem::temp_directory_path() / ("himes-accept-" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);
  auto run = [&](const std::string& name) {
    std::ostringstream out, err;
    const int rc = cli::run_cli({"eval", "--test-set", testkit::fixture("testset.jsonl").string(), "--kb",
                                 testkit::fixture("kb.jsonl").string(), "--out", (root / name).string(), "--seed",
                                 "7", "--lambdas", "0,0.5"},
                                out, err);
    return rc == 0 ? out.str() : "rc=" + std::to_string(rc) + " " + err.str();
  };
  const auto a = run("a"), b = run("b");
  std::size_t files = 0, differ = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto other = root / "b" / std::filesystem::relative(e.path(), root / "a");
    if (!std::filesystem::exists(other) || slurp(e.path()) != slurp(other)) ++differ;
  }
  std::filesystem::remove_all(root);
  return {a == b && files >= 4 && differ == 0,
          std::to_string(files) + " report files compared, " + std::to_string(differ) + " differ"};
}

// ---- 12 ------------------------------------------------------------------
Outcome datagen_coverage() {
  std::ifstream in(testkit::fixture("sources.jsonl"));
  const auto sources = datagen::read_sources(in);
  datagen::StubUserAgent user;
  datagen::StubAccountAgent agent;
  datagen::DatagenOptions options;
  options.seed = 11;
  options.max_turns = 6;
  const auto result =
      datagen::run_datagen(sources, {&user, &agent, nullptr, nullptr}, datagen::RewriteTaskCatalog::shipped_default(), options);
  std::map<std::pair<bool, datagen::Style>, int> cells;
  for (const auto& b : result.blueprints) ++cells[{b.time_sensitive, b.style}];
  bool cover = result.blueprints.size() == 40 && cells.size() == 4;
  for (const auto& [cell, count] : cells) cover = cover && count == 10;
  std::size_t capped = 0;
  for (const auto& t : result.transcripts)
    if (t.termination == datagen::Termination::max_turns && t.turns.size() == options.max_turns) ++capped;
  return {cover && capped == result.transcripts.size() && capped == 40,
          std::to_string(result.blueprints.size()) + " blueprints in " + std::to_string(cells.size()) +
              " cells, " + std::to_string(capped) + " transcripts stopped at max_turns"};
}

// ---- 13 ------------------------------------------------------------------
Outcome service_round_trip() {
  service::ServiceConfig config;
  config.kb_path = testkit::fixture("kb.jsonl");
  config.threads = 2;
  auto bundle = service::make_clients(config);
  auto kb = pipeline::KnowledgeBase::load_jsonl(config.kb_path, *bundle.embedder);
  auto store = std::make_unique<memory::MemoryStore>(memory::TopicTaxonomy::shipped_default(), config.dimension);
  service::ServiceApp app(config, std::move(bundle), std::move(kb), std::move(store));
  service::HttpServer server(app);
  const int port = server.bind("127.0.0.1", 0);
  std::thread runner([&] { server.run(); });

  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  try {
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(10, 0);
    auto post = [&](const char* path, const json& body) {
      auto res = client.Post(path, body.dump(), "application/json");
      if (!res) throw std::runtime_error(std::string("no response from ") + path);
      return std::make_pair(res->status, json::parse(res->body));
    };
    const std::string q = "Which rail pass covers the bullet trains to Osaka?";
    auto [s1, stored] = post("/v1/memory/store", {{"user_id", "alice"}, {"query", q}});
    expect(s1 == 200, "store status " + std::to_string(s1));
    post("/v1/memory/store", {{"user_id", "alice"}, {"query", "Where can I buy gluten free bread?"}});
    auto [s2, recalled] = post("/v1/memory/recall", {{"user_id", "alice"}, {"query", q}, {"n", 5}});
    expect(s2 == 200 && !recalled["results"].empty(), "recall returned nothing");
    if (s2 == 200 && !recalled["results"].empty()) {
      const auto& top = recalled["results"][0];
      expect(top["query_text"] == q, "top hit is not the stored query");
      expect(top["record_id"] == stored["record_id"], "top hit id differs");
      expect(std::abs(top["similarity"].get<double>() - 1.0) <= 1e-9, "top similarity is not 1.0");
    }

    const json history = json::array({{{"role", "user"}, {"text", "I am planning a trip to Japan."}}});
    auto stages = [&](const json& overrides) {
      auto [status, body] = post("/v1/answer", {{"user_id", "alice"}, {"history", history},
                                                {"query", "Does the pass include reserved seats?"}, {"config", overrides}});
      std::set<std::string> names;
      if (status != 200) {
        failures.push_back("answer status " + std::to_string(status) + " " + body.dump());
        return names;
      }
      for (const auto& st : body["trace"]["stages"]) names.insert(st["name"].get<std::string>());
      auto got = client.Get(("/v1/trace/" + body["trace_id"].get<std::string>()).c_str());
      expect(got && got->status == 200 && json::parse(got->body) == body["trace"], "GET trace differs from answer trace");
      return names;
    };
    const auto full = stages({{"stm_enabled", true}, {"ltm_enabled", true}});
    expect(full.count("rewrite") && full.count("recall") && full.count("rerank"), "full config misses a stage");
    const auto no_stm = stages({{"stm_enabled", false}, {"ltm_enabled", true}});
    expect(!no_stm.count("rewrite") && no_stm.count("recall"), "stm off still rewrites");
    const auto no_ltm = stages({{"stm_enabled", true}, {"ltm_enabled", false}});
    expect(no_ltm.count("rewrite") && !no_ltm.count("recall") && !no_ltm.count("rerank"), "ltm off still recalls");
  } catch (const std::exception& e) {
    failures.push_back(e.what());
  }
  server.stop();
  runner.join();
  std::string detail = failures.empty() ? "round trip and stage switches hold" : failures.front();
  if (failures.size() > 1) detail += " (+" + std::to_string(failures.size() - 1) + " more)";
  return {failures.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"Rouge-L matches brute-force LCS", rouge_oracle},
      {"hser = F1 + a*EM + b*Hit", hser_formula},
      {"fusion is hser at lambda 0 and affine in lambda", fusion_affine},
      {"rerank_top_k matches score-and-sort oracle", rerank_oracle},
      {"rerank order invariant to history scaling", rerank_scale_invariance},
      {"partition recall is filtered global recall", partition_recall},
      {"group-relative advantages normalized", grpo_normalization},
      {"rewriter lifts coreference retrieval", coref_ablation},
      {"repeated asking rate hand counts", rar_hand_count},
      {"shipped taxonomy matches reference table", taxonomy_fidelity},
      {"eval reports byte-identical across runs", eval_determinism},
      {"datagen cell coverage and turn cap", datagen_coverage},
      {"service store/recall and stage switches", service_round_trip},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  %2zu  %-48s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
