#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chatcad/domain.hpp"
#include "chatcad/knowledge.hpp"
#include "chatcad/llm.hpp"
#include "chatcad/pipeline.hpp"
#include "chatcad/report_index.hpp"
#include "chatcad/retrieval.hpp"
#include "chatcad/templates.hpp"

namespace chatcad {

struct MockRule {
  std::string pattern;  // ECMAScript regex searched in the prompt
  std::string reply;    // {prompt} and {1}..{9} are substituted
};

struct LlmConfig {
  std::string backend = "mock";  // mock | script | remote
  std::vector<MockRule> rules;
  std::optional<std::string> fallback;
  std::vector<std::string> script;
  std::string base_url;
  std::string model;
  GatewayPolicy policy;
  std::uint64_t jitter_seed = 0x5eed;
  CallSettings settings;
  bool transcript = true;
};

struct DomainConfig {
  std::string id;
  std::string description;
  std::filesystem::path cad;
  std::optional<std::vector<double>> embedding;  // else the provider's "domain:<id>" text vector
};

/// JSON service configuration. Relative paths resolve against the
/// directory of the config file.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "data";

  LlmConfig llm;

  std::optional<std::filesystem::path> embeddings_file;
  std::optional<std::string> embeddings_url;
  std::size_t embeddings_dimension = 0;
  std::vector<DomainConfig> domains;

  std::optional<std::filesystem::path> index;   // prebuilt index
  std::optional<std::filesystem::path> corpus;  // else built from NDJSON at startup
  std::optional<std::filesystem::path> terms;

  std::optional<std::filesystem::path> tree;    // serialized tree
  std::optional<std::filesystem::path> kb_dir;  // else ingested at startup
  std::optional<std::filesystem::path> templates;

  std::size_t k = kDefaultExemplars;
  PromptStyle style = PromptStyle::P3Illustrative;

  std::string navigator = "llm";  // llm | script
  std::optional<std::filesystem::path> navigator_script;
  bool report_context = true;
  RetrievalOptions retrieval;

  std::optional<std::string> api_token;
  std::string cors_origin = "*";

  /// Throws ConfigError.
  static ServiceConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static ServiceConfig load(const std::filesystem::path& path);

  /// Referenced files exist, k in [0, 5], enum values known. Throws ConfigError.
  void validate() const;
};

/// Everything the handlers need, loaded once at startup.
class Runtime {
 public:
  explicit Runtime(const ServiceConfig& config);

  [[nodiscard]] const ServiceConfig& config() const noexcept { return config_; }
  [[nodiscard]] const DomainRegistry& registry() const noexcept { return *registry_; }
  [[nodiscard]] const EmbeddingProvider& embeddings() const noexcept { return *embeddings_; }
  [[nodiscard]] const ReportIndex& index() const noexcept { return *index_; }
  [[nodiscard]] const KnowledgeTree& tree() const noexcept { return tree_; }
  [[nodiscard]] const PromptTemplates& templates() const noexcept { return templates_; }
  [[nodiscard]] LlmClient& llm() const noexcept { return *llm_; }
  [[nodiscard]] const Gateway* gateway() const noexcept { return gateway_.get(); }

  /// Image ids across all CAD fixtures, in domain order.
  [[nodiscard]] std::vector<std::pair<std::string, std::string>> cases() const;

  /// Records every LLM call from here on.
  void attach_transcript(std::shared_ptr<TranscriptStore> store);

  [[nodiscard]] PipelineContext pipeline_context() const;
  [[nodiscard]] std::unique_ptr<Navigator> make_navigator() const;

 private:
  ServiceConfig config_;
  std::shared_ptr<EmbeddingProvider> embeddings_;
  std::unique_ptr<DomainRegistry> registry_;
  std::vector<std::shared_ptr<FileCadAdapter>> adapters_;
  std::unique_ptr<ReportIndex> index_;
  KnowledgeTree tree_;
  PromptTemplates templates_;
  std::shared_ptr<Gateway> gateway_;
  std::shared_ptr<LlmClient> llm_;
  std::optional<nlohmann::json> navigator_script_;
};

/// Backend selected by configuration, wrapped in the gateway.
std::shared_ptr<Gateway> make_gateway(const LlmConfig& config);

}  // namespace chatcad
