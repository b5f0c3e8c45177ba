#include "himes/memory/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <set>

#include "himes/core/errors.hpp"
#include "himes/core/hash.hpp"

namespace himes::memory {

namespace fs = std::filesystem;

nlohmann::json to_json(const MemoryRecord& r) {
  return {{"record_id", r.id.value},
          {"user_id", r.user_id},
          {"query_text", r.query_text},
          {"topic", r.partition.topic},
          {"subtopic", r.partition.subtopic},
          {"embedding", std::vector<double>(r.embedding.values().begin(), r.embedding.values().end())},
          {"timestamp", core::format_rfc3339(r.timestamp)}};
}

MemoryRecord record_from_json(const nlohmann::json& j) {
  try {
    MemoryRecord r;
    r.id = RecordId{j.at("record_id").get<std::uint64_t>()};
    r.user_id = j.at("user_id").get<std::string>();
    r.query_text = j.at("query_text").get<std::string>();
    r.partition = {j.at("topic").get<std::string>(), j.at("subtopic").get<std::string>()};
    r.embedding = core::EmbeddingVector(j.at("embedding").get<std::vector<double>>());
    r.timestamp = core::parse_rfc3339(j.at("timestamp").get<std::string>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed memory record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }
  int get() const noexcept { return fd_; }
  explicit operator bool() const noexcept { return fd_ >= 0; }

 private:
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_ = -1;
};

std::string slug(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (!out.empty() && out.back() != '-') {
      out.push_back('-');
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? "p" : out;
}

std::string log_file_name(const PartitionKey& key) {
  const auto h = core::fnv1a64(key.subtopic, core::fnv1a64(key.topic + '\x1f'));
  return slug(key.topic) + "__" + slug(key.subtopic) + "." + core::hex64(h).substr(0, 8) + ".jsonl";
}

}  // namespace

class MemoryStore::Log {
 public:
  Log(fs::path dir, bool exclusive, bool fsync) : dir_(std::move(dir)), fsync_(fsync) {
    std::error_code ec;
    fs::create_directories(dir_ / "partitions", ec);
    if (ec) throw StoreUnavailableError("cannot create store directory " + dir_.string() + ": " + ec.message());
    if (exclusive) {
      lock_ = Fd(::open((dir_ / "LOCK").c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644));
      if (!lock_) throw StoreUnavailableError("cannot open lock file in " + dir_.string());
      if (::flock(lock_.get(), LOCK_EX | LOCK_NB) != 0)
        throw StoreUnavailableError("memory store " + dir_.string() + " is locked by another process");
    }
  }

  fs::path partitions_dir() const { return dir_ / "partitions"; }

  void append(const PartitionKey& key, const std::string& line) {
    std::lock_guard lk(mu_);
    auto it = files_.find(key);
    if (it == files_.end()) {
      const auto path = partitions_dir() / log_file_name(key);
      Fd fd(::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644));
      if (!fd) throw StoreUnavailableError("cannot open log " + path.string() + ": " + std::strerror(errno));
      it = files_.emplace(key, std::move(fd)).first;
    }
    const std::string data = line + "\n";
    std::size_t written = 0;
    while (written < data.size()) {
      const auto n = ::write(it->second.get(), data.data() + written, data.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw StoreUnavailableError(std::string("memory log write failed: ") + std::strerror(errno));
      }
      written += static_cast<std::size_t>(n);
    }
    if (fsync_ && ::fdatasync(it->second.get()) != 0)
      throw StoreUnavailableError(std::string("memory log sync failed: ") + std::strerror(errno));
  }

 private:
  fs::path dir_;
  bool fsync_;
  Fd lock_;
  std::mutex mu_;
  std::map<PartitionKey, Fd> files_;
};

// ---------------------------------------------------------------------------

MemoryStore::MemoryStore(TopicTaxonomy taxonomy, std::size_t dimension)
    : MemoryStore(std::move(taxonomy), dimension, Options{}) {}

MemoryStore::MemoryStore(TopicTaxonomy taxonomy, std::size_t dimension, Options options)
    : taxonomy_(std::move(taxonomy)), dimension_(dimension), options_(options) {
  if (dimension_ == 0) throw ValidationError("memory store dimension must be positive");
  keys_ = taxonomy_.partitions();
  for (const auto& k : keys_) tree_[k.topic][k.subtopic];
}

MemoryStore::~MemoryStore() = default;

std::unique_ptr<MemoryStore> MemoryStore::open(const fs::path& dir, TopicTaxonomy taxonomy, std::size_t dimension,
                                               bool exclusive_lock, Options options) {
  auto store = std::make_unique<MemoryStore>(std::move(taxonomy), dimension, options);
  auto log = std::make_unique<Log>(dir, exclusive_lock, options.fsync_writes);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(log->partitions_dir()))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::set<std::uint64_t> ids;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
      const auto nl = content.find('\n', pos);
      const bool terminated = nl != std::string::npos;
      const std::string line = content.substr(pos, terminated ? nl - pos : std::string::npos);
      pos = terminated ? nl + 1 : content.size();
      ++line_no;
      if (line.empty()) continue;
      MemoryRecord r;
      try {
        r = record_from_json(nlohmann::json::parse(line));
      } catch (const std::exception& e) {
        // An unterminated last line is an interrupted append; anything else is corruption.
        if (!terminated) break;
        throw StoreUnavailableError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      try {
        store->validate(r.query_text, r.partition, r.embedding);
      } catch (const ValidationError& e) {
        throw StoreUnavailableError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (!ids.insert(r.id.value).second)
        throw StoreUnavailableError(path.string() + ": duplicate record id " + std::to_string(r.id.value));
      store->insert_locked(r);
    }
  }
  store->next_id_ = ids.empty() ? 1 : *ids.rbegin() + 1;
  store->log_ = std::move(log);
  return store;
}

std::unique_ptr<MemoryStore> MemoryStore::clone_in_memory() const {
  std::shared_lock lk(mu_);
  auto copy = std::make_unique<MemoryStore>(taxonomy_, dimension_, options_);
  copy->tree_ = tree_;
  copy->total_ = total_;
  copy->next_id_ = next_id_;
  return copy;
}

void MemoryStore::validate(const std::string& query_text, const PartitionKey& partition,
                           const core::EmbeddingVector& embedding) const {
  if (query_text.empty()) throw ValidationError("memory record query_text must be non-empty");
  if (embedding.dimension() != dimension_)
    throw DimensionError("embedding dimension " + std::to_string(embedding.dimension()) + " does not match store dimension " +
                         std::to_string(dimension_));
  if (!embedding.is_unit()) throw ValidationError("memory record embeddings must be unit-norm");
  if (!taxonomy_.contains(partition))
    throw TaxonomyError("unknown partition (\"" + partition.topic + "\", \"" + partition.subtopic + "\")");
}

void MemoryStore::insert_locked(const MemoryRecord& r) {
  auto& partition = tree_.at(r.partition.topic).at(r.partition.subtopic);
  auto [it, inserted] = partition.users.try_emplace(r.user_id);
  if (inserted) it->second.embeddings = kernels::EmbeddingMatrix(dimension_);
  it->second.embeddings.push_back(r.embedding);
  it->second.meta.push_back({r.id, r.query_text, r.timestamp});
  ++partition.count;
  ++total_;
}

RecordId MemoryStore::store_query(const std::string& user_id, const std::string& query_text,
                                  const PartitionKey& partition, const core::EmbeddingVector& embedding,
                                  core::Timestamp timestamp) {
  validate(query_text, partition, embedding);
  std::unique_lock lk(mu_);
  MemoryRecord r{RecordId{next_id_}, user_id, query_text, partition, embedding, timestamp};
  if (log_) log_->append(partition, to_json(r).dump());
  insert_locked(r);
  ++next_id_;
  ++writes_;
  return r.id;
}

const MemoryStore::Partition* MemoryStore::find_partition(const PartitionKey& key) const {
  auto t = tree_.find(key.topic);
  if (t == tree_.end()) return nullptr;
  auto s = t->second.find(key.subtopic);
  return s == t->second.end() ? nullptr : &s->second;
}

void MemoryStore::scan_partition(const PartitionKey& key, const Partition& p, const std::string& user_id,
                                 const core::EmbeddingVector& query, std::vector<Candidate>& out) const {
  auto it = p.users.find(user_id);
  if (it == p.users.end() || it->second.meta.empty()) return;
  const UserShard& shard = it->second;
  std::vector<double> scores(shard.meta.size());
  kernels::cosine_scan(options_.execution, query, shard.embeddings, scores);
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({scores[i], &key, &shard, i});
}

std::vector<MemoryStore::Candidate> MemoryStore::top(std::vector<Candidate> c, std::size_t n) const {
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    const auto& ma = a.shard->meta[a.row];
    const auto& mb = b.shard->meta[b.row];
    if (ma.timestamp != mb.timestamp) return ma.timestamp > mb.timestamp;
    return ma.id < mb.id;
  };
  const std::size_t keep = std::min(n, c.size());
  std::partial_sort(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(keep), c.end(), better);
  c.resize(keep);
  return c;
}

MemoryRecord MemoryStore::materialize(const Candidate& c, const std::string& user_id) {
  const auto& m = c.shard->meta[c.row];
  return {m.id, user_id, m.query_text, *c.key, c.shard->embeddings.vector(c.row), m.timestamp};
}

std::vector<RecallResult> MemoryStore::recall_top_n(const std::string& user_id, const core::EmbeddingVector& query,
                                                    std::size_t n, const RecallScope& scope) const {
  if (n == 0) throw ValidationError("recall_top_n requires n >= 1");
  if (query.dimension() != dimension_)
    throw DimensionError("query dimension " + std::to_string(query.dimension()) + " does not match store dimension " +
                         std::to_string(dimension_));
  if (scope.kind() != RecallScope::Kind::global && !taxonomy_.contains(scope.key()))
    throw TaxonomyError("unknown partition (\"" + scope.key().topic + "\", \"" + scope.key().subtopic + "\")");

  std::shared_lock lk(mu_);
  ++recalls_;
  std::vector<Candidate> picked;

  auto scan_global = [&](const PartitionKey* skip) {
    std::vector<Candidate> all;
    for (const auto& key : keys_) {
      if (skip && key == *skip) continue;
      scan_partition(key, *find_partition(key), user_id, query, all);
    }
    return all;
  };

  switch (scope.kind()) {
    case RecallScope::Kind::global:
      picked = top(scan_global(nullptr), n);
      break;
    case RecallScope::Kind::partition: {
      const PartitionKey* key = &*std::find(keys_.begin(), keys_.end(), scope.key());
      std::vector<Candidate> local;
      scan_partition(*key, *find_partition(*key), user_id, query, local);
      picked = top(std::move(local), n);
      break;
    }
    case RecallScope::Kind::partition_then_global: {
      const PartitionKey* key = &*std::find(keys_.begin(), keys_.end(), scope.key());
      std::vector<Candidate> local;
      scan_partition(*key, *find_partition(*key), user_id, query, local);
      picked = top(std::move(local), n);
      if (picked.size() < n) {
        auto rest = top(scan_global(key), n - picked.size());
        picked.insert(picked.end(), rest.begin(), rest.end());
        picked = top(std::move(picked), n);
      }
      break;
    }
  }

  std::vector<RecallResult> out;
  out.reserve(picked.size());
  for (const auto& c : picked) out.push_back({materialize(c, user_id), c.similarity});
  return out;
}

std::size_t MemoryStore::candidate_set_size(const RecallScope& scope) const {
  std::shared_lock lk(mu_);
  if (scope.kind() == RecallScope::Kind::global) return total_;
  const Partition* p = find_partition(scope.key());
  return p ? p->count : 0;
}

std::size_t MemoryStore::size() const {
  std::shared_lock lk(mu_);
  return total_;
}

std::vector<MemoryRecord> MemoryStore::user_records_locked(const std::string& user_id) const {
  std::vector<MemoryRecord> out;
  for (const auto& key : keys_) {
    const Partition* p = find_partition(key);
    auto it = p->users.find(user_id);
    if (it == p->users.end()) continue;
    for (std::size_t i = 0; i < it->second.meta.size(); ++i)
      out.push_back(materialize({0.0, &key, &it->second, i}, user_id));
  }
  return out;
}

std::vector<MemoryRecord> MemoryStore::records_for_user(const std::string& user_id) const {
  std::shared_lock lk(mu_);
  auto out = user_records_locked(user_id);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::vector<MemoryRecord> MemoryStore::recent_for_user(const std::string& user_id, std::size_t n) const {
  std::shared_lock lk(mu_);
  ++recalls_;
  auto out = user_records_locked(user_id);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
    return a.id > b.id;
  });
  if (out.size() > n) out.resize(n);
  return out;
}

}  // namespace himes::memory
