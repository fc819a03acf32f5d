#include "chatcad/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "http_util.hpp"

namespace chatcad {

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

CompletionRequest user_request(std::string prompt, std::string tag) {
  CompletionRequest r;
  r.messages.push_back({Role::User, std::move(prompt)});
  r.tag = std::move(tag);
  return r;
}

void validate(const CompletionRequest& request) {
  bool has_user = false;
  for (const auto& m : request.messages) {
    if (m.role == Role::User) has_user = true;
    if (m.role != Role::Assistant && m.content.empty()) {
      throw Error(ErrorCode::InvalidArgument, "empty " + std::string(to_string(m.role)) + " message");
    }
  }
  if (!has_user) throw Error(ErrorCode::InvalidArgument, "request has no user message");
  if (!(request.temperature >= 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
  if (request.max_tokens <= 0) throw Error(ErrorCode::InvalidArgument, "max_tokens must be positive");
}

std::string prompt_text(const CompletionRequest& request) {
  std::string out;
  for (const auto& m : request.messages) {
    if (m.role != Role::User) continue;
    if (!out.empty()) out.push_back('\n');
    out.append(m.content);
  }
  return out;
}

// --- mocks ------------------------------------------------------------------

ScriptedMock::ScriptedMock(std::vector<std::string> replies) : replies_(replies.begin(), replies.end()) {}

std::string ScriptedMock::complete(const CompletionRequest& request) {
  validate(request);
  std::lock_guard lock(mutex_);
  ++calls_;
  if (replies_.empty()) throw Error(ErrorCode::MockExhausted, "scripted mock has no replies left");
  auto reply = std::move(replies_.front());
  replies_.pop_front();
  return reply;
}

std::size_t ScriptedMock::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

RuleMock::RuleMock(std::vector<Rule> rules, std::optional<Responder> fallback)
    : rules_(std::move(rules)), fallback_(std::move(fallback)) {}

RuleMock::Responder RuleMock::literal(std::string reply) {
  return [reply = std::move(reply)](const std::string&) { return reply; };
}

RuleMock::Responder RuleMock::templated(std::string reply_template) {
  return [tpl = std::move(reply_template)](const std::string& prompt) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
      const auto hit = tpl.find("{prompt}", pos);
      if (hit == std::string::npos) break;
      out.append(tpl, pos, hit - pos);
      out.append(prompt);
      pos = hit + 8;
    }
    out.append(tpl, pos);
    return out;
  };
}

RuleMock::Responder RuleMock::substitute(std::regex pattern, std::string reply_template) {
  return [pattern = std::move(pattern), tpl = std::move(reply_template)](const std::string& prompt) {
    std::smatch m;
    const bool matched = std::regex_search(prompt, m, pattern);
    std::string out;
    for (std::size_t i = 0; i < tpl.size(); ++i) {
      if (tpl.compare(i, 8, "{prompt}") == 0) {
        out.append(prompt);
        i += 7;
      } else if (tpl[i] == '{' && i + 2 < tpl.size() && tpl[i + 1] >= '1' && tpl[i + 1] <= '9' && tpl[i + 2] == '}') {
        const auto g = static_cast<std::size_t>(tpl[i + 1] - '0');
        if (matched && g < m.size()) out.append(m[g].str());
        i += 2;
      } else {
        out.push_back(tpl[i]);
      }
    }
    return out;
  };
}

std::string RuleMock::complete(const CompletionRequest& request) {
  validate(request);
  {
    std::lock_guard lock(mutex_);
    ++calls_;
  }
  const auto prompt = prompt_text(request);
  for (const auto& rule : rules_) {
    if (std::regex_search(prompt, rule.pattern)) return rule.respond(prompt);
  }
  if (fallback_) return (*fallback_)(prompt);
  throw Error(ErrorCode::MockExhausted, "no rule matches prompt");
}

std::size_t RuleMock::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

// --- remote -----------------------------------------------------------------

RemoteChatClient::RemoteChatClient(std::string base_url, std::string model, std::string api_key,
                                   std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), model_(std::move(model)), api_key_(std::move(api_key)), timeout_(timeout) {}

std::shared_ptr<RemoteChatClient> RemoteChatClient::from_env(std::string base_url, std::string model,
                                                             std::chrono::milliseconds timeout) {
  const char* key = std::getenv("CHATCADP_LLM_KEY");
  return std::make_shared<RemoteChatClient>(std::move(base_url), std::move(model), key ? key : "", timeout);
}

nlohmann::json RemoteChatClient::request_body(const CompletionRequest& request, const std::string& model) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return {{"model", model},
          {"messages", messages},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}

std::string RemoteChatClient::complete(const CompletionRequest& request) {
  validate(request);
  const auto url = detail::split_url(base_url_);
  auto client = detail::make_client(url.origin, timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const auto res =
      client->Post(url.path + "/chat/completions", headers, request_body(request, model_).dump(), "application/json");
  if (!res) {
    throw BackendError(ErrorCode::LlmUnavailable, "transport error: " + httplib::to_string(res.error()), true);
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw BackendError(ErrorCode::AuthError, "HTTP " + std::to_string(status), false, status);
  }
  if (status == 429 || status >= 500) {
    throw BackendError(ErrorCode::LlmUnavailable, "HTTP " + std::to_string(status), true, status);
  }
  if (status != 200) {
    throw BackendError(ErrorCode::ResponseMalformed, "unexpected HTTP " + std::to_string(status), false, status);
  }
  try {
    return nlohmann::json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(ErrorCode::ResponseMalformed, e.what(), false, status);
  }
}

// --- gateway ----------------------------------------------------------------

void GatewayPolicy::validate() const {
  if (max_retries < 0 || backoff_base.count() <= 0 || timeout.count() <= 0 || max_in_flight <= 0 ||
      (requests_per_minute && *requests_per_minute <= 0) || rate_window.count() <= 0) {
    throw Error(ErrorCode::ConfigError, "gateway policy values must be positive");
  }
}

Gateway::Gateway(std::shared_ptr<LlmClient> backend, GatewayPolicy policy, std::uint64_t jitter_seed, Sleeper sleeper)
    : backend_(std::move(backend)), policy_(policy), sleep_(std::move(sleeper)), jitter_(jitter_seed) {
  policy_.validate();
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void Gateway::acquire_slot() {
  std::unique_lock lock(mutex_);
  slot_cv_.wait(lock, [&] { return in_flight_ < policy_.max_in_flight; });
  ++in_flight_;
  stats_.peak_in_flight = std::max(stats_.peak_in_flight, in_flight_);
}

void Gateway::release_slot() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  slot_cv_.notify_one();
}

void Gateway::wait_for_rate() {
  if (!policy_.requests_per_minute) return;
  while (true) {
    std::chrono::milliseconds wait{0};
    {
      std::lock_guard lock(mutex_);
      const auto now = std::chrono::steady_clock::now();
      while (!recent_.empty() && now - recent_.front() >= policy_.rate_window) recent_.pop_front();
      if (recent_.size() < static_cast<std::size_t>(*policy_.requests_per_minute)) {
        recent_.push_back(now);
        return;
      }
      wait = std::chrono::duration_cast<std::chrono::milliseconds>(recent_.front() + policy_.rate_window - now) +
             std::chrono::milliseconds(1);
    }
    std::this_thread::sleep_for(wait);
  }
}

std::chrono::milliseconds Gateway::next_backoff(int attempt) {
  std::lock_guard lock(mutex_);
  const auto cap = policy_.backoff_base.count() * (std::int64_t{1} << std::min(attempt, 30));
  std::uniform_int_distribution<std::int64_t> dist(0, cap);
  const std::chrono::milliseconds d{dist(jitter_)};
  stats_.backoffs.push_back(d);
  return d;
}

std::string Gateway::complete(const CompletionRequest& request) {
  validate(request);
  {
    std::lock_guard lock(mutex_);
    ++stats_.calls;
  }
  for (int attempt = 0;; ++attempt) {
    wait_for_rate();
    acquire_slot();
    {
      std::lock_guard lock(mutex_);
      ++stats_.attempts;
    }
    try {
      auto reply = backend_->complete(request);
      release_slot();
      return reply;
    } catch (const BackendError& e) {
      release_slot();
      if (!e.retryable()) throw;
      if (attempt >= policy_.max_retries) {
        throw Error(ErrorCode::LlmUnavailable,
                    "giving up after " + std::to_string(attempt + 1) + " attempts: " + e.what());
      }
    } catch (...) {
      release_slot();
      throw;
    }
    sleep_(next_backoff(attempt));
  }
}

GatewayStats Gateway::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

// --- transcript -------------------------------------------------------------

nlohmann::json to_json(const TranscriptRow& row) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : row.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return {{"seq", row.seq},
          {"tag", row.tag},
          {"messages", messages},
          {"response", row.response ? nlohmann::json(*row.response) : nlohmann::json()},
          {"error", row.error ? nlohmann::json(*row.error) : nlohmann::json()},
          {"latency_ms", row.latency_ms}};
}

TranscriptStore::TranscriptStore(const std::filesystem::path& path) : file_(std::make_unique<JsonlFile>(path)) {}

void TranscriptStore::record(TranscriptRow row) {
  std::lock_guard lock(mutex_);
  row.seq = rows_.size();
  if (file_) file_->append(to_json(row));
  rows_.push_back(std::move(row));
}

std::vector<TranscriptRow> TranscriptStore::rows() const {
  std::lock_guard lock(mutex_);
  return rows_;
}

TranscriptClient::TranscriptClient(std::shared_ptr<LlmClient> inner, std::shared_ptr<TranscriptStore> store)
    : inner_(std::move(inner)), store_(std::move(store)) {}

std::string TranscriptClient::complete(const CompletionRequest& request) {
  TranscriptRow row;
  row.tag = request.tag;
  row.messages = request.messages;
  const auto start = std::chrono::steady_clock::now();
  try {
    auto reply = inner_->complete(request);
    row.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    row.response = reply;
    store_->record(std::move(row));
    return reply;
  } catch (const std::exception& e) {
    row.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    row.error = e.what();
    store_->record(std::move(row));
    throw;
  }
}

std::shared_ptr<LlmClient> with_transcript(std::shared_ptr<LlmClient> inner, std::shared_ptr<TranscriptStore> store) {
  return std::make_shared<TranscriptClient>(std::move(inner), std::move(store));
}

}  // namespace chatcad
