#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chatcad/domain.hpp"
#include "chatcad/llm.hpp"
#include "chatcad/prob2text.hpp"
#include "chatcad/report_index.hpp"
#include "chatcad/templates.hpp"

namespace chatcad {

inline constexpr std::size_t kMaxExemplars = 5;
inline constexpr std::size_t kDefaultExemplars = 3;
inline constexpr int kTraceSchemaVersion = 1;

/// One prompt sent and the completion received.
struct LlmExchange {
  std::string tag;
  std::string prompt;
  std::string completion;
};

struct RetrievedExemplar {
  std::uint32_t record_id = 0;
  std::string doc_id;
  std::string text;
  double distance = 0.0;
};

struct GenerationTrace {
  std::string image_ref;
  std::string domain_id;
  std::vector<DomainScore> domain_scores;
  CadOutput cad_output;
  PromptStyle style = PromptStyle::P3Illustrative;
  VisualDescription visual_description;
  std::string visual_text;
  std::string preliminary_report;
  std::vector<RetrievedExemplar> retrieved;  // ascending distance
  std::string enhanced_report;
  std::size_t k_requested = 0;
  std::size_t k_used = 0;
  bool degraded = false;
  std::vector<LlmExchange> llm_calls;
  std::vector<std::pair<std::string, double>> timings_ms;  // stage order
};

nlohmann::json to_json(const GenerationTrace& trace);

/// Monotonic milliseconds; injected so traces can be reproduced exactly.
using StageClock = std::function<double()>;
StageClock steady_stage_clock();

/// Rendered visual description: header line, one line per finding, then the
/// network's raw report when it produced one.
std::string visual_prompt_text(const VisualDescription& desc, const CadOutput& output,
                               const PromptTemplates& templates);

struct CallSettings {
  double temperature = 0.0;
  int max_tokens = 1024;
};

/// Completion for the preliminary-report prompt. The exchange is appended to `log`.
std::string generate_preliminary(const std::string& visual_text, const std::string& domain_id, LlmClient& llm,
                                 const PromptTemplates& templates, std::vector<LlmExchange>& log,
                                 CallSettings settings = {});

/// Exemplars joined as numbered blocks, most similar first. Adding an exemplar
/// only appends one block.
std::string format_exemplars(const std::vector<std::string>& exemplars, const PromptTemplates& templates);

std::string refine_prompt(const std::string& preliminary, const std::vector<std::string>& exemplars,
                          const PromptTemplates& templates);

/// Returns `preliminary` untouched (and calls nothing) when `exemplars` is empty.
std::string enhance_with_examples(const std::string& preliminary, const std::vector<std::string>& exemplars,
                                  LlmClient& llm, const PromptTemplates& templates, std::vector<LlmExchange>& log,
                                  CallSettings settings = {});

struct PipelineContext {
  const DomainRegistry* registry = nullptr;
  const EmbeddingProvider* embeddings = nullptr;
  const ReportIndex* index = nullptr;
  LlmClient* llm = nullptr;
  const PromptTemplates* templates = nullptr;
  StageClock clock;  // defaults to steady_stage_clock()
  CallSettings settings;
};

/// identify domain -> CAD inference -> prob2text -> preliminary report ->
/// top-k retrieval on the preliminary report -> refinement. A preliminary
/// report with no term-set words degrades to k_used = 0.
/// Throws UnknownImage, EmptyRegistry, LlmUnavailable, InvalidArgument (k > 5).
GenerationTrace generate_report(const std::string& image_ref, std::size_t k, PromptStyle style,
                                const PipelineContext& ctx);

}  // namespace chatcad
