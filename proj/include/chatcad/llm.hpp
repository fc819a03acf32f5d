#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chatcad/error.hpp"
#include "chatcad/jsonl.hpp"

namespace chatcad {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role) noexcept;

struct ChatMessage {
  Role role = Role::User;
  std::string content;
};

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string tag;  // pipeline stage, for tracing
};

/// Single-user-message request.
CompletionRequest user_request(std::string prompt, std::string tag);

/// Throws InvalidArgument unless there is a user message, user/system
/// contents are non-empty, temperature >= 0 and max_tokens > 0.
void validate(const CompletionRequest& request);

/// Concatenated user-message contents; what the mocks match against.
std::string prompt_text(const CompletionRequest& request);

/// Uniform chat-completion interface. Implementations are safe for
/// concurrent complete() calls.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

/// Raised by backends; the gateway retries only when `retryable()`.
class BackendError : public Error {
 public:
  BackendError(ErrorCode code, const std::string& message, bool retryable, int http_status = 0)
      : Error(code, message), retryable_(retryable), http_status_(http_status) {}
  [[nodiscard]] bool retryable() const noexcept { return retryable_; }
  [[nodiscard]] int http_status() const noexcept { return http_status_; }

 private:
  bool retryable_;
  int http_status_;
};

/// Replies from a fixed queue in call order; MockExhausted afterwards.
class ScriptedMock final : public LlmClient {
 public:
  explicit ScriptedMock(std::vector<std::string> replies);
  std::string complete(const CompletionRequest& request) override;
  [[nodiscard]] std::size_t calls() const;

 private:
  mutable std::mutex mutex_;
  std::deque<std::string> replies_;
  std::size_t calls_ = 0;
};

/// First rule whose regex matches the prompt text decides the reply.
class RuleMock final : public LlmClient {
 public:
  using Responder = std::function<std::string(const std::string& prompt)>;
  struct Rule {
    std::regex pattern;
    Responder respond;
  };

  explicit RuleMock(std::vector<Rule> rules, std::optional<Responder> fallback = std::nullopt);

  static Responder literal(std::string reply);
  /// Substitutes "{prompt}" in the template with the prompt text.
  static Responder templated(std::string reply_template);
  /// Like templated(), and "{1}".."{9}" become capture groups of `pattern`.
  static Responder substitute(std::regex pattern, std::string reply_template);

  std::string complete(const CompletionRequest& request) override;
  [[nodiscard]] std::size_t calls() const;

 private:
  std::vector<Rule> rules_;
  std::optional<Responder> fallback_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
};

/// OpenAI-compatible chat completions over HTTP(S):
/// POST {base_url}/chat/completions with bearer auth.
class RemoteChatClient final : public LlmClient {
 public:
  RemoteChatClient(std::string base_url, std::string model, std::string api_key,
                   std::chrono::milliseconds timeout);
  /// API key from CHATCADP_LLM_KEY.
  static std::shared_ptr<RemoteChatClient> from_env(std::string base_url, std::string model,
                                                    std::chrono::milliseconds timeout);

  std::string complete(const CompletionRequest& request) override;
  [[nodiscard]] static nlohmann::json request_body(const CompletionRequest& request, const std::string& model);

 private:
  std::string base_url_;
  std::string model_;
  std::string api_key_;
  std::chrono::milliseconds timeout_;
};

struct GatewayPolicy {
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds timeout{60000};
  int max_in_flight = 4;
  std::optional<int> requests_per_minute;
  std::chrono::milliseconds rate_window{60000};

  /// Throws ConfigError unless every field is positive (max_retries may be 0).
  void validate() const;
};

struct GatewayStats {
  std::size_t calls = 0;
  std::size_t attempts = 0;
  std::vector<std::chrono::milliseconds> backoffs;
  int peak_in_flight = 0;
};

/// Policy layer over a backend: retries with full-jitter exponential backoff
/// (uniform in [0, base * 2^attempt]), a global in-flight cap, and an
/// optional per-window request rate cap.
class Gateway final : public LlmClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Gateway(std::shared_ptr<LlmClient> backend, GatewayPolicy policy, std::uint64_t jitter_seed = 0x5eed,
          Sleeper sleeper = {});

  /// Throws LlmUnavailable after max_retries retries; AuthError, ResponseMalformed
  /// and other non-retryable errors pass through on first occurrence.
  std::string complete(const CompletionRequest& request) override;

  [[nodiscard]] GatewayStats stats() const;
  [[nodiscard]] const GatewayPolicy& policy() const noexcept { return policy_; }

 private:
  void acquire_slot();
  void release_slot();
  void wait_for_rate();
  std::chrono::milliseconds next_backoff(int attempt);

  std::shared_ptr<LlmClient> backend_;
  GatewayPolicy policy_;
  Sleeper sleep_;

  mutable std::mutex mutex_;
  std::condition_variable slot_cv_;
  int in_flight_ = 0;
  std::deque<std::chrono::steady_clock::time_point> recent_;
  std::mt19937_64 jitter_;
  GatewayStats stats_;
};

struct TranscriptRow {
  std::size_t seq = 0;
  std::string tag;
  std::vector<ChatMessage> messages;
  std::optional<std::string> response;
  std::optional<std::string> error;
  double latency_ms = 0.0;
};

nlohmann::json to_json(const TranscriptRow& row);

/// In-memory transcript, optionally mirrored to an append-only JSONL file.
class TranscriptStore {
 public:
  TranscriptStore() = default;
  explicit TranscriptStore(const std::filesystem::path& path);

  void record(TranscriptRow row);
  [[nodiscard]] std::vector<TranscriptRow> rows() const;

 private:
  mutable std::mutex mutex_;
  std::vector<TranscriptRow> rows_;
  std::unique_ptr<JsonlFile> file_;
};

/// Decorator recording every (request, response or error, latency).
class TranscriptClient final : public LlmClient {
 public:
  TranscriptClient(std::shared_ptr<LlmClient> inner, std::shared_ptr<TranscriptStore> store);
  std::string complete(const CompletionRequest& request) override;

 private:
  std::shared_ptr<LlmClient> inner_;
  std::shared_ptr<TranscriptStore> store_;
};

std::shared_ptr<LlmClient> with_transcript(std::shared_ptr<LlmClient> inner, std::shared_ptr<TranscriptStore> store);

}  // namespace chatcad
