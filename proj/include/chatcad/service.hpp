#pragma once

#include <functional>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "chatcad/config.hpp"
#include "chatcad/store.hpp"

namespace httplib {
class Server;
}

namespace chatcad {

struct ApiResponse {
  int status = 200;
  std::string body;
};

/// HTTP status for an error code: 404 unknown ids, 400 bad input, 502 LLM
/// backend failures, 500 otherwise.
int http_status(ErrorCode code) noexcept;

/// JSON API over the report pipeline and knowledge retrieval. Traces and
/// sessions live in JSONL files under the data directory and are replayed on
/// construction.
class Service {
 public:
  explicit Service(std::shared_ptr<Runtime> runtime);
  ~Service();

  ApiResponse report(const std::string& body);
  ApiResponse chat(const std::string& body);
  ApiResponse trace(const std::string& id) const;
  ApiResponse session(const std::string& id) const;
  ApiResponse cases() const;

  /// Registers the /v1 routes.
  void mount(httplib::Server& server);

  /// Blocks until stop(). `on_ready` receives the bound port (useful with port 0).
  /// Returns false if the address cannot be bound.
  bool listen(const std::string& host, int port, const std::function<void(int)>& on_ready = {});
  void stop();

  [[nodiscard]] const Runtime& runtime() const noexcept { return *runtime_; }

 private:
  ApiResponse chat_in_session(const std::string& session_id, const std::string& message);

  std::shared_ptr<Runtime> runtime_;
  std::unique_ptr<TraceStore> traces_;
  std::unique_ptr<SessionStore> sessions_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace chatcad
