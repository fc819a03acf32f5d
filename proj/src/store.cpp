#include "chatcad/store.hpp"

#include <chrono>
#include <ctime>
#include <random>

#include "chatcad/error.hpp"

namespace chatcad {

namespace {

std::string trace_id(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tr-%06zu", n);
  return buf;
}

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string random_token() {
  static std::mt19937_64 rng{std::random_device{}()};
  static std::mutex m;
  std::lock_guard lock(m);
  char buf[24];
  std::snprintf(buf, sizeof buf, "s-%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

nlohmann::json to_json(const Turn& t) {
  nlohmann::json j{{"role", t.role}, {"text", t.text}};
  j["attachment"] = t.attachment ? nlohmann::json{{"kind", t.attachment->kind}, {"id", t.attachment->id}} : nlohmann::json();
  for (const auto& [k, v] : t.extra.items()) j[k] = v;
  return j;
}

Turn turn_from_json(const nlohmann::json& j) {
  Turn t;
  t.role = j.at("role").get<std::string>();
  t.text = j.at("text").get<std::string>();
  if (j.contains("attachment") && !j["attachment"].is_null()) {
    t.attachment = Attachment{j["attachment"].at("kind").get<std::string>(), j["attachment"].at("id").get<std::string>()};
  }
  for (const auto& [k, v] : j.items()) {
    if (k != "role" && k != "text" && k != "attachment") t.extra[k] = v;
  }
  return t;
}

}  // namespace

TraceStore::TraceStore(const std::filesystem::path& path) : file_(path) {
  for (const auto& row : file_.replay()) {
    if (!row.contains("id") || !row.contains("trace")) continue;
    traces_[row["id"].get<std::string>()] = row["trace"].dump();
    ++next_;
  }
}

std::string TraceStore::put(const nlohmann::json& trace) {
  std::lock_guard lock(mutex_);
  auto id = trace_id(next_);
  while (traces_.count(id)) id = trace_id(++next_);
  file_.append({{"id", id}, {"trace", trace}});
  traces_[id] = trace.dump();
  ++next_;
  return id;
}

std::optional<std::string> TraceStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = traces_.find(id);
  if (it == traces_.end()) return std::nullopt;
  return it->second;
}

std::size_t TraceStore::size() const {
  std::lock_guard lock(mutex_);
  return traces_.size();
}

nlohmann::json to_json(const Session& s) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : s.turns) turns.push_back(to_json(t));
  return {{"id", s.id}, {"created_at", s.created_at}, {"turns", turns}};
}

SessionStore::SessionStore(const std::filesystem::path& path) : file_(path) {
  for (const auto& row : file_.replay()) {
    try {
      const auto type = row.at("type").get<std::string>();
      if (type == "session") {
        const auto id = row.at("id").get<std::string>();
        sessions_[id] = Session{id, row.at("created_at").get<std::string>(), {}};
      } else if (type == "turn") {
        const auto it = sessions_.find(row.at("session_id").get<std::string>());
        if (it != sessions_.end()) it->second.turns.push_back(turn_from_json(row.at("turn")));
      }
    } catch (const nlohmann::json::exception&) {
      // unknown row shape
    }
  }
}

std::string SessionStore::create() {
  std::lock_guard lock(mutex_);
  auto id = random_token();
  while (sessions_.count(id)) id = random_token();
  Session s{id, now_iso(), {}};
  file_.append({{"type", "session"}, {"id", id}, {"created_at", s.created_at}});
  sessions_[id] = std::move(s);
  return id;
}

void SessionStore::append(const std::string& session_id, const std::vector<Turn>& turns) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session '" + session_id + "'");
  for (const auto& t : turns) {
    file_.append({{"type", "turn"}, {"session_id", session_id}, {"turn", to_json(t)}});
    it->second.turns.push_back(t);
  }
}

std::optional<Session> SessionStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

bool SessionStore::exists(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return sessions_.count(id) > 0;
}

std::unique_lock<std::mutex> SessionStore::lock_session(const std::string& id) {
  std::mutex* m = nullptr;
  {
    std::lock_guard lock(mutex_);
    auto& slot = session_locks_[id];
    if (!slot) slot = std::make_unique<std::mutex>();
    m = slot.get();
  }
  return std::unique_lock<std::mutex>(*m);
}

}  // namespace chatcad
