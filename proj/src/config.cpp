#include "chatcad/config.hpp"

#include <fstream>
#include <set>

#include "chatcad/error.hpp"

namespace chatcad {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad(where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) bad("unknown key '" + k + "' in " + where);
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    bad(where + "." + key + " has the wrong type");
  }
}

std::optional<fs::path> path_of(const json& j, const char* key, const std::string& where, const fs::path& base) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) bad(where + "." + key + " must be a path string");
  const fs::path p = j[key].get<std::string>();
  return p.is_absolute() ? p : base / p;
}

GatewayPolicy policy_from(const json& j) {
  only_keys(j, "llm.policy",
            {"max_retries", "backoff_base_ms", "timeout_ms", "max_in_flight", "requests_per_minute", "rate_window_ms"});
  GatewayPolicy p;
  p.max_retries = get(j, "max_retries", "llm.policy", p.max_retries);
  p.backoff_base = std::chrono::milliseconds(get<long long>(j, "backoff_base_ms", "llm.policy", p.backoff_base.count()));
  p.timeout = std::chrono::milliseconds(get<long long>(j, "timeout_ms", "llm.policy", p.timeout.count()));
  p.max_in_flight = get(j, "max_in_flight", "llm.policy", p.max_in_flight);
  if (j.contains("requests_per_minute") && !j["requests_per_minute"].is_null()) {
    p.requests_per_minute = get<int>(j, "requests_per_minute", "llm.policy", 0);
  }
  p.rate_window = std::chrono::milliseconds(get<long long>(j, "rate_window_ms", "llm.policy", p.rate_window.count()));
  return p;
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const json& j, const fs::path& base) {
  only_keys(j, "config",
            {"listen", "data_dir", "llm", "embeddings", "domains", "index", "corpus", "terms", "knowledge",
             "templates", "report", "chat", "api_token", "cors_origin"});
  ServiceConfig c;
  if (j.contains("listen")) {
    only_keys(j["listen"], "listen", {"host", "port"});
    c.host = get(j["listen"], "host", "listen", c.host);
    c.port = get(j["listen"], "port", "listen", c.port);
  }
  c.data_dir = path_of(j, "data_dir", "config", base).value_or(base / "data");

  if (j.contains("llm")) {
    const auto& l = j["llm"];
    only_keys(l, "llm",
              {"backend", "rules", "fallback", "script", "base_url", "model", "policy", "jitter_seed", "temperature",
               "max_tokens", "transcript"});
    c.llm.backend = get(l, "backend", "llm", c.llm.backend);
    if (l.contains("rules")) {
      if (!l["rules"].is_array()) bad("llm.rules must be an array");
      for (const auto& r : l["rules"]) {
        only_keys(r, "llm.rules[]", {"pattern", "reply"});
        c.llm.rules.push_back({get<std::string>(r, "pattern", "llm.rules[]", ""), get<std::string>(r, "reply", "llm.rules[]", "")});
      }
    }
    if (l.contains("fallback") && !l["fallback"].is_null()) c.llm.fallback = get<std::string>(l, "fallback", "llm", "");
    c.llm.script = get(l, "script", "llm", c.llm.script);
    c.llm.base_url = get(l, "base_url", "llm", c.llm.base_url);
    c.llm.model = get(l, "model", "llm", c.llm.model);
    if (l.contains("policy")) c.llm.policy = policy_from(l["policy"]);
    c.llm.jitter_seed = get(l, "jitter_seed", "llm", c.llm.jitter_seed);
    c.llm.settings.temperature = get(l, "temperature", "llm", c.llm.settings.temperature);
    c.llm.settings.max_tokens = get(l, "max_tokens", "llm", c.llm.settings.max_tokens);
    c.llm.transcript = get(l, "transcript", "llm", c.llm.transcript);
  }

  if (j.contains("embeddings")) {
    const auto& e = j["embeddings"];
    if (e.is_string()) {
      c.embeddings_file = path_of(j, "embeddings", "config", base);
    } else {
      only_keys(e, "embeddings", {"file", "url", "dimension"});
      c.embeddings_file = path_of(e, "file", "embeddings", base);
      if (e.contains("url")) c.embeddings_url = get<std::string>(e, "url", "embeddings", "");
      c.embeddings_dimension = get<std::size_t>(e, "dimension", "embeddings", 0);
    }
  }
  if (j.contains("domains")) {
    if (!j["domains"].is_array()) bad("domains must be an array");
    for (const auto& d : j["domains"]) {
      only_keys(d, "domains[]", {"id", "description", "cad", "embedding"});
      DomainConfig dc;
      dc.id = get<std::string>(d, "id", "domains[]", "");
      dc.description = get<std::string>(d, "description", "domains[]", dc.id);
      const auto cad = path_of(d, "cad", "domains[]", base);
      if (!cad) bad("domain '" + dc.id + "' has no cad fixture");
      dc.cad = *cad;
      if (d.contains("embedding")) dc.embedding = get<std::vector<double>>(d, "embedding", "domains[]", {});
      c.domains.push_back(std::move(dc));
    }
  }
  c.index = path_of(j, "index", "config", base);
  c.corpus = path_of(j, "corpus", "config", base);
  c.terms = path_of(j, "terms", "config", base);
  if (j.contains("knowledge")) {
    only_keys(j["knowledge"], "knowledge", {"tree", "dir"});
    c.tree = path_of(j["knowledge"], "tree", "knowledge", base);
    c.kb_dir = path_of(j["knowledge"], "dir", "knowledge", base);
  }
  c.templates = path_of(j, "templates", "config", base);
  if (j.contains("report")) {
    only_keys(j["report"], "report", {"k", "style"});
    const auto k = get<long long>(j["report"], "k", "report", static_cast<long long>(c.k));
    if (k < 0 || k > static_cast<long long>(kMaxExemplars)) bad("report.k must be in [0, 5]");
    c.k = static_cast<std::size_t>(k);
    const auto style = get<std::string>(j["report"], "style", "report", std::string(to_string(c.style)));
    const auto parsed = parse_prompt_style(style);
    if (!parsed) bad("report.style must be P1, P2 or P3");
    c.style = *parsed;
  }
  if (j.contains("chat")) {
    const auto& ch = j["chat"];
    only_keys(ch, "chat", {"navigator", "script", "report_context", "budget", "max_depth", "candidates"});
    c.navigator = get(ch, "navigator", "chat", c.navigator);
    c.navigator_script = path_of(ch, "script", "chat", base);
    c.report_context = get(ch, "report_context", "chat", c.report_context);
    c.retrieval.budget = get(ch, "budget", "chat", c.retrieval.budget);
    c.retrieval.max_depth = get(ch, "max_depth", "chat", c.retrieval.max_depth);
    c.retrieval.candidates = get(ch, "candidates", "chat", c.retrieval.candidates);
  }
  if (j.contains("api_token") && !j["api_token"].is_null()) c.api_token = get<std::string>(j, "api_token", "config", "");
  c.cors_origin = get(j, "cors_origin", "config", c.cors_origin);
  c.validate();
  return c;
}

ServiceConfig ServiceConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    bad(path.string() + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

void ServiceConfig::validate() const {
  auto must_exist = [](const std::optional<fs::path>& p, const char* what) {
    if (p && !fs::exists(*p)) bad(std::string(what) + " not found: " + p->string());
  };
  if (llm.backend != "mock" && llm.backend != "script" && llm.backend != "remote") {
    bad("llm.backend must be mock, script or remote");
  }
  if (llm.backend == "remote" && llm.base_url.empty()) bad("llm.base_url is required for the remote backend");
  for (const auto& r : llm.rules) {
    try {
      std::regex re(r.pattern);
    } catch (const std::regex_error& e) {
      bad("invalid llm rule pattern '" + r.pattern + "': " + e.what());
    }
  }
  try {
    llm.policy.validate();
  } catch (const Error& e) {
    bad(std::string("llm.policy: ") + e.what());
  }
  if (llm.settings.temperature < 0 || llm.settings.max_tokens <= 0) bad("llm temperature/max_tokens out of range");
  if (!embeddings_file && !embeddings_url) bad("embeddings is required");
  if (embeddings_url && embeddings_dimension == 0) bad("embeddings.dimension is required with a url");
  must_exist(embeddings_file, "embeddings file");
  if (domains.empty()) bad("at least one domain is required");
  std::set<std::string> ids;
  for (const auto& d : domains) {
    if (d.id.empty()) bad("domain without an id");
    if (!ids.insert(d.id).second) bad("duplicate domain '" + d.id + "'");
    must_exist(d.cad, "cad fixture");
  }
  if (!index && !corpus) bad("either index or corpus is required");
  must_exist(index, "index");
  must_exist(corpus, "corpus");
  must_exist(terms, "terms file");
  if (!tree && !kb_dir) bad("knowledge.tree or knowledge.dir is required");
  must_exist(tree, "knowledge tree");
  must_exist(kb_dir, "knowledge directory");
  must_exist(templates, "templates file");
  if (k > kMaxExemplars) bad("report.k must be in [0, 5]");
  if (navigator != "llm" && navigator != "script") bad("chat.navigator must be llm or script");
  if (navigator == "script" && !navigator_script) bad("chat.script is required for the script navigator");
  must_exist(navigator_script, "navigator script");
  if (retrieval.budget < 1 || retrieval.max_depth < 1 || retrieval.candidates < 1) bad("chat budget/max_depth/candidates must be positive");
  if (port < 0 || port > 65535) bad("listen.port out of range");
}

std::shared_ptr<Gateway> make_gateway(const LlmConfig& c) {
  std::shared_ptr<LlmClient> backend;
  if (c.backend == "remote") {
    backend = RemoteChatClient::from_env(c.base_url, c.model, c.policy.timeout);
  } else if (c.backend == "script") {
    backend = std::make_shared<ScriptedMock>(c.script);
  } else {
    std::vector<RuleMock::Rule> rules;
    for (const auto& r : c.rules) {
      std::regex re(r.pattern);
      rules.push_back({re, RuleMock::substitute(re, r.reply)});
    }
    std::optional<RuleMock::Responder> fallback;
    if (c.fallback) fallback = RuleMock::templated(*c.fallback);
    backend = std::make_shared<RuleMock>(std::move(rules), std::move(fallback));
  }
  return std::make_shared<Gateway>(std::move(backend), c.policy, c.jitter_seed);
}

Runtime::Runtime(const ServiceConfig& config) : config_(config), templates_(PromptTemplates::defaults()) {
  config_.validate();
  if (config_.embeddings_url) {
    embeddings_ = std::make_shared<HttpEmbeddingProvider>(*config_.embeddings_url, config_.embeddings_dimension);
  } else {
    embeddings_ = FileEmbeddingProvider::load(*config_.embeddings_file);
  }
  registry_ = std::make_unique<DomainRegistry>(embeddings_->dimension());
  for (const auto& d : config_.domains) {
    auto adapter = FileCadAdapter::load(d.cad);
    auto vec = d.embedding ? *d.embedding : embeddings_->embed_text("domain:" + d.id);
    registry_->add_domain({d.id, d.description, std::move(vec)});
    registry_->register_adapter(d.id, adapter);
    adapters_.push_back(std::move(adapter));
  }
  if (config_.index) {
    index_ = std::make_unique<ReportIndex>(ReportIndex::load(*config_.index));
  } else {
    const auto terms = config_.terms ? TermSet::load(*config_.terms) : TermSet::default_thoracic();
    index_ = std::make_unique<ReportIndex>(ReportIndex::build(load_corpus_ndjson(*config_.corpus), terms));
  }
  tree_ = config_.tree ? KnowledgeTree::load(*config_.tree) : ingest_directory(*config_.kb_dir);
  if (config_.templates) templates_ = PromptTemplates::load(*config_.templates);
  if (config_.navigator_script) {
    std::ifstream in(*config_.navigator_script);
    try {
      navigator_script_ = nlohmann::json::parse(in);
      (void)ScriptedNavigator::from_json(*navigator_script_);
    } catch (const nlohmann::json::parse_error& e) {
      bad(config_.navigator_script->string() + ": " + e.what());
    }
  }
  gateway_ = make_gateway(config_.llm);
  llm_ = gateway_;
}

std::vector<std::pair<std::string, std::string>> Runtime::cases() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& a : adapters_) {
    for (const auto& id : a->image_ids()) out.emplace_back(id, a->domain_id());
  }
  return out;
}

void Runtime::attach_transcript(std::shared_ptr<TranscriptStore> store) { llm_ = with_transcript(gateway_, std::move(store)); }

PipelineContext Runtime::pipeline_context() const {
  PipelineContext ctx;
  ctx.registry = registry_.get();
  ctx.embeddings = embeddings_.get();
  ctx.index = index_.get();
  ctx.llm = llm_.get();
  ctx.templates = &templates_;
  ctx.settings = config_.llm.settings;
  return ctx;
}

std::unique_ptr<Navigator> Runtime::make_navigator() const {
  if (config_.navigator == "script") return std::make_unique<ScriptedNavigator>(ScriptedNavigator::from_json(*navigator_script_));
  return std::make_unique<LlmNavigator>(*llm_, config_.llm.settings);
}

}  // namespace chatcad
