#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chatcad/jsonl.hpp"

namespace chatcad {

/// Traces by id, persisted one JSON row per trace. get() returns the exact
/// bytes stored, before and after a restart.
class TraceStore {
 public:
  explicit TraceStore(const std::filesystem::path& path);

  std::string put(const nlohmann::json& trace);
  [[nodiscard]] std::optional<std::string> get(const std::string& id) const;
  [[nodiscard]] std::size_t size() const;

 private:
  JsonlFile file_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> traces_;
  std::size_t next_ = 1;
};

struct Attachment {
  std::string kind;  // generation | retrieval
  std::string id;
};

struct Turn {
  std::string role;  // user | assistant
  std::string text;
  std::optional<Attachment> attachment;
  nlohmann::json extra = nlohmann::json::object();  // citation, flags
};

struct Session {
  std::string id;
  std::string created_at;
  std::vector<Turn> turns;
};

nlohmann::json to_json(const Session& session);

/// Sessions rebuilt from an append-only event log ("session" and "turn" rows).
class SessionStore {
 public:
  explicit SessionStore(const std::filesystem::path& path);

  std::string create();
  /// Throws NotFound.
  void append(const std::string& session_id, const std::vector<Turn>& turns);
  [[nodiscard]] std::optional<Session> get(const std::string& id) const;
  [[nodiscard]] bool exists(const std::string& id) const;

  /// Held while a chat turn for this session is being produced.
  [[nodiscard]] std::unique_lock<std::mutex> lock_session(const std::string& id);

 private:
  JsonlFile file_;
  mutable std::mutex mutex_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_locks_;
};

}  // namespace chatcad
