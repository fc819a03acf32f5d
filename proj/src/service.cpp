#include "chatcad/service.hpp"

#include <httplib.h>

#include "chatcad/error.hpp"

namespace chatcad {

using nlohmann::json;

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownImage:
    case ErrorCode::UnknownDomain:
    case ErrorCode::NotFound:
    case ErrorCode::PathNotFound: return 404;
    case ErrorCode::InvalidArgument:
    case ErrorCode::PreconditionViolation: return 400;
    case ErrorCode::LlmUnavailable:
    case ErrorCode::AuthError:
    case ErrorCode::ResponseMalformed:
    case ErrorCode::MockExhausted: return 502;
    default: return 500;
  }
}

namespace {

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
  return {status, json{{"error", {{"code", code}, {"message", message}}}}.dump()};
}

ApiResponse error_response(const Error& e) {
  return error_response(http_status(e.code()), std::string(to_string(e.code())), e.what());
}

ApiResponse ok(const json& j) { return {200, j.dump()}; }

std::optional<json> parse_body(const std::string& body, ApiResponse& err) {
  try {
    auto j = json::parse(body);
    if (!j.is_object()) {
      err = error_response(400, "InvalidArgument", "request body must be a JSON object");
      return std::nullopt;
    }
    return j;
  } catch (const json::parse_error& e) {
    err = error_response(400, "InvalidArgument", std::string("malformed JSON: ") + e.what());
    return std::nullopt;
  }
}

std::string excerpt(const std::string& text, std::size_t max = 240) {
  if (text.size() <= max) return text;
  auto cut = text.rfind(' ', max);
  if (cut == std::string::npos || cut < max / 2) cut = max;
  return text.substr(0, cut) + "...";
}

}  // namespace

Service::Service(std::shared_ptr<Runtime> runtime) : runtime_(std::move(runtime)) {
  const auto& dir = runtime_->config().data_dir;
  std::filesystem::create_directories(dir);
  traces_ = std::make_unique<TraceStore>(dir / "traces.jsonl");
  sessions_ = std::make_unique<SessionStore>(dir / "sessions.jsonl");
  if (runtime_->config().llm.transcript) {
    runtime_->attach_transcript(std::make_shared<TranscriptStore>(dir / "transcripts.jsonl"));
  }
}

Service::~Service() { stop(); }

ApiResponse Service::report(const std::string& body) {
  ApiResponse err;
  const auto req = parse_body(body, err);
  if (!req) return err;
  const auto& cfg = runtime_->config();
  if (!req->contains("image_id") || !(*req)["image_id"].is_string() || (*req)["image_id"].get<std::string>().empty()) {
    return error_response(400, "InvalidArgument", "image_id is required");
  }
  const auto image = (*req)["image_id"].get<std::string>();
  std::size_t k = cfg.k;
  if (req->contains("k") && !(*req)["k"].is_null()) {
    const auto& kj = (*req)["k"];
    if (!kj.is_number_integer() || kj.get<long long>() < 0 || kj.get<long long>() > static_cast<long long>(kMaxExemplars)) {
      return error_response(400, "InvalidArgument", "k must be an integer in [0, 5]");
    }
    k = kj.get<std::size_t>();
  }
  PromptStyle style = cfg.style;
  if (req->contains("style") && !(*req)["style"].is_null()) {
    const auto parsed = (*req)["style"].is_string() ? parse_prompt_style((*req)["style"].get<std::string>()) : std::nullopt;
    if (!parsed) return error_response(400, "InvalidArgument", "style must be P1, P2 or P3");
    style = *parsed;
  }
  std::optional<std::string> session_id;
  if (req->contains("session_id") && !(*req)["session_id"].is_null()) {
    if (!(*req)["session_id"].is_string()) return error_response(400, "InvalidArgument", "session_id must be a string");
    session_id = (*req)["session_id"].get<std::string>();
    if (!sessions_->exists(*session_id)) return error_response(404, "NotFound", "no session '" + *session_id + "'");
  }
  try {
    const auto trace = generate_report(image, k, style, runtime_->pipeline_context());
    const auto id = traces_->put(to_json(trace));
    json resp{{"report", trace.enhanced_report},
              {"preliminary_report", trace.preliminary_report},
              {"trace_id", id},
              {"domain_id", trace.domain_id},
              {"k_used", trace.k_used},
              {"degraded", trace.degraded}};
    if (session_id) {
      auto lock = sessions_->lock_session(*session_id);
      Turn user{"user", "Generate a report for image " + image, std::nullopt, json::object()};
      Turn assistant{"assistant", trace.enhanced_report, Attachment{"generation", id}, json::object()};
      sessions_->append(*session_id, {user, assistant});
      resp["session_id"] = *session_id;
    }
    return ok(resp);
  } catch (const Error& e) {
    return error_response(e);
  }
}

ApiResponse Service::chat(const std::string& body) {
  ApiResponse err;
  const auto req = parse_body(body, err);
  if (!req) return err;
  if (!req->contains("message") || !(*req)["message"].is_string() || (*req)["message"].get<std::string>().empty()) {
    return error_response(400, "InvalidArgument", "message must be a non-empty string");
  }
  std::string session_id;
  if (req->contains("session_id") && !(*req)["session_id"].is_null()) {
    if (!(*req)["session_id"].is_string()) return error_response(400, "InvalidArgument", "session_id must be a string");
    session_id = (*req)["session_id"].get<std::string>();
    if (!sessions_->exists(session_id)) return error_response(404, "NotFound", "no session '" + session_id + "'");
  } else {
    session_id = sessions_->create();
  }
  auto lock = sessions_->lock_session(session_id);
  return chat_in_session(session_id, (*req)["message"].get<std::string>());
}

ApiResponse Service::chat_in_session(const std::string& session_id, const std::string& message) {
  const auto& cfg = runtime_->config();
  std::string query = message;
  if (cfg.report_context) {
    const auto s = sessions_->get(session_id);
    for (auto it = s->turns.rbegin(); it != s->turns.rend(); ++it) {
      if (it->attachment && it->attachment->kind == "generation") {
        query = message + "\n\nPatient report: " + it->text;
        break;
      }
    }
  }
  try {
    auto navigator = runtime_->make_navigator();
    const auto retrieval = retrieve_knowledge(query, runtime_->tree(), *navigator, runtime_->templates(), cfg.retrieval);
    std::vector<LlmExchange> log;
    std::string answer;
    json citation;
    const bool grounded = retrieval.knowledge && !retrieval.knowledge->empty();
    if (grounded) {
      answer = answer_with_knowledge(query, *retrieval.knowledge, runtime_->llm(), runtime_->templates(), &log,
                                     cfg.llm.settings);
      citation = {{"path", retrieval.found_path ? *retrieval.found_path : retrieval.visited.back()},
                  {"excerpt", excerpt(*retrieval.knowledge)},
                  {"low_confidence", retrieval.low_confidence}};
    } else {
      answer = answer_ungrounded(query, runtime_->llm(), runtime_->templates(), &log, cfg.llm.settings);
    }
    auto trace = to_json(retrieval);
    trace["answer"] = {{"prompt", log.at(0).prompt}, {"completion", log.at(0).completion}, {"tag", log.at(0).tag}};
    trace["grounded"] = grounded;
    const auto id = traces_->put(trace);

    json extra{{"ungrounded", !grounded}};
    if (grounded) extra["citation"] = citation;
    sessions_->append(session_id, {Turn{"user", message, std::nullopt, json::object()},
                                   Turn{"assistant", answer, Attachment{"retrieval", id}, extra}});
    json resp{{"session_id", session_id},
              {"answer", answer},
              {"trace_id", id},
              {"ungrounded", !grounded},
              {"outcome", to_string(retrieval.outcome)}};
    resp["citation"] = grounded ? citation : json();
    return ok(resp);
  } catch (const Error& e) {
    return error_response(e);
  }
}

ApiResponse Service::trace(const std::string& id) const {
  if (auto t = traces_->get(id)) return {200, *t};
  return error_response(404, "NotFound", "no trace '" + id + "'");
}

ApiResponse Service::session(const std::string& id) const {
  if (auto s = sessions_->get(id)) return ok(to_json(*s));
  return error_response(404, "NotFound", "no session '" + id + "'");
}

ApiResponse Service::cases() const {
  json arr = json::array();
  for (const auto& [image, domain] : runtime_->cases()) arr.push_back({{"image_id", image}, {"domain_id", domain}});
  return ok({{"cases", arr}});
}

void Service::mount(httplib::Server& server) {
  const auto origin = runtime_->config().cors_origin;
  const auto token = runtime_->config().api_token;
  const auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.set_pre_routing_handler([origin, token, send](const httplib::Request& req, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Access-Control-Allow-Headers", "Content-Type, Authorization");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    if (req.method == "OPTIONS") {
      res.status = 204;
      return httplib::Server::HandlerResponse::Handled;
    }
    if (token && req.path.rfind("/v1/", 0) == 0 && req.get_header_value("Authorization") != "Bearer " + *token) {
      send(res, error_response(401, "Unauthorized", "missing or wrong API token"));
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });
  server.Post("/v1/report", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, report(req.body)); });
  server.Post("/v1/chat", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, chat(req.body)); });
  server.Get(R"(/v1/trace/([A-Za-z0-9_\-]+))",
             [this, send](const httplib::Request& req, httplib::Response& res) { send(res, trace(req.matches[1])); });
  server.Get(R"(/v1/sessions/([A-Za-z0-9_\-]+))",
             [this, send](const httplib::Request& req, httplib::Response& res) { send(res, session(req.matches[1])); });
  server.Get("/v1/cases", [this, send](const httplib::Request&, httplib::Response& res) { send(res, cases()); });
  server.Get("/v1/health", [send](const httplib::Request&, httplib::Response& res) { send(res, ok({{"status", "ok"}})); });
}

bool Service::listen(const std::string& host, int port, const std::function<void(int)>& on_ready) {
  server_ = std::make_unique<httplib::Server>();
  mount(*server_);
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) return false;
  if (on_ready) on_ready(bound);
  return server_->listen_after_bind();
}

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace chatcad
