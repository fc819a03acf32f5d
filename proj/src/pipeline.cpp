#include "chatcad/pipeline.hpp"

#include "chatcad/error.hpp"

namespace chatcad {

namespace {

std::string call(LlmClient& llm, std::string prompt, std::string tag, CallSettings settings,
                 std::vector<LlmExchange>& log) {
  auto request = user_request(prompt, tag);
  request.temperature = settings.temperature;
  request.max_tokens = settings.max_tokens;
  auto completion = llm.complete(request);
  log.push_back({std::move(tag), std::move(prompt), completion});
  return completion;
}

}  // namespace

StageClock steady_stage_clock() {
  return [] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch()).count();
  };
}

std::string visual_prompt_text(const VisualDescription& desc, const CadOutput& output,
                               const PromptTemplates& templates) {
  auto text = render(desc, templates.get(PromptTemplates::kVisualHeader).render({{"domain", desc.domain_id}}));
  if (output.raw_report && !output.raw_report->empty()) {
    text += "\nNetwork report: " + *output.raw_report;
  }
  return text;
}

std::string generate_preliminary(const std::string& visual_text, const std::string& domain_id, LlmClient& llm,
                                 const PromptTemplates& templates, std::vector<LlmExchange>& log,
                                 CallSettings settings) {
  if (visual_text.empty()) throw Error(ErrorCode::InvalidArgument, "empty visual description");
  auto prompt =
      templates.get(PromptTemplates::kPreliminary).render({{"visual_description", visual_text}, {"domain", domain_id}});
  return call(llm, std::move(prompt), "preliminary_report", settings, log);
}

std::string format_exemplars(const std::vector<std::string>& exemplars, const PromptTemplates& templates) {
  const auto& block = templates.get(PromptTemplates::kExampleBlock);
  std::string out;
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    out += block.render({{"index", std::to_string(i + 1)}, {"example", exemplars[i]}});
    out += "\n\n";
  }
  return out;
}

std::string refine_prompt(const std::string& preliminary, const std::vector<std::string>& exemplars,
                          const PromptTemplates& templates) {
  return templates.get(PromptTemplates::kRefine)
      .render({{"preliminary_report", preliminary},
               {"examples", format_exemplars(exemplars, templates)},
               {"visual_description", ""}});
}

std::string enhance_with_examples(const std::string& preliminary, const std::vector<std::string>& exemplars,
                                  LlmClient& llm, const PromptTemplates& templates, std::vector<LlmExchange>& log,
                                  CallSettings settings) {
  if (exemplars.empty()) return preliminary;
  return call(llm, refine_prompt(preliminary, exemplars, templates), "refine_report", settings, log);
}

GenerationTrace generate_report(const std::string& image_ref, std::size_t k, PromptStyle style,
                                const PipelineContext& ctx) {
  if (!ctx.registry || !ctx.embeddings || !ctx.index || !ctx.llm || !ctx.templates) {
    throw Error(ErrorCode::InvalidArgument, "pipeline context incomplete");
  }
  if (k > kMaxExemplars) throw Error(ErrorCode::InvalidArgument, "k must be in [0, 5]");
  if (ctx.registry->empty()) throw Error(ErrorCode::EmptyRegistry, "no domains registered");
  const auto clock = ctx.clock ? ctx.clock : steady_stage_clock();
  const auto& templates = *ctx.templates;

  GenerationTrace trace;
  trace.image_ref = image_ref;
  trace.k_requested = k;
  trace.style = style;
  double mark = clock();
  auto lap = [&](const char* stage) {
    const double now = clock();
    trace.timings_ms.emplace_back(stage, now - mark);
    mark = now;
  };

  const auto embedding = ctx.embeddings->embed_image(image_ref);
  trace.domain_scores = domain_scores(embedding, ctx.registry->domains());
  trace.domain_id = ctx.registry->identify(embedding);
  lap("identify_domain");

  trace.cad_output = ctx.registry->dispatch(trace.domain_id)->infer(image_ref);
  lap("cad_inference");

  trace.visual_description = prob2text(trace.cad_output, style);
  trace.visual_text = visual_prompt_text(trace.visual_description, trace.cad_output, templates);
  lap("prob2text");

  trace.preliminary_report =
      generate_preliminary(trace.visual_text, trace.domain_id, *ctx.llm, templates, trace.llm_calls, ctx.settings);
  lap("preliminary_report");

  std::vector<std::string> exemplars;
  if (k > 0) {
    try {
      for (const auto& hit : ctx.index->query_top_k(trace.preliminary_report, k)) {
        trace.retrieved.push_back({hit.record->id, hit.record->doc_id, hit.record->text, hit.distance});
        exemplars.push_back(hit.record->text);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroEmbedding) throw;
      trace.degraded = true;
    }
  }
  trace.k_used = trace.retrieved.size();
  lap("retrieval");

  trace.enhanced_report =
      enhance_with_examples(trace.preliminary_report, exemplars, *ctx.llm, templates, trace.llm_calls, ctx.settings);
  lap("refinement");
  return trace;
}

nlohmann::json to_json(const GenerationTrace& t) {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& s : t.domain_scores) scores.push_back({{"id", s.id}, {"cosine", s.cosine}});
  nlohmann::json retrieved = nlohmann::json::array();
  for (const auto& r : t.retrieved) {
    retrieved.push_back({{"record_id", r.record_id}, {"doc_id", r.doc_id}, {"text", r.text}, {"distance", r.distance}});
  }
  nlohmann::json calls = nlohmann::json::array();
  for (const auto& c : t.llm_calls) calls.push_back({{"tag", c.tag}, {"prompt", c.prompt}, {"completion", c.completion}});
  nlohmann::json timings = nlohmann::json::array();
  for (const auto& [stage, ms] : t.timings_ms) timings.push_back({{"stage", stage}, {"ms", ms}});
  return {{"kind", "generation"},
          {"schema_version", kTraceSchemaVersion},
          {"image_ref", t.image_ref},
          {"domain_id", t.domain_id},
          {"domain_scores", scores},
          {"cad_output", to_json(t.cad_output)},
          {"style", to_string(t.style)},
          {"visual_description", {{"domain_id", t.visual_description.domain_id}, {"lines", t.visual_description.lines}}},
          {"visual_text", t.visual_text},
          {"preliminary_report", t.preliminary_report},
          {"retrieved", retrieved},
          {"enhanced_report", t.enhanced_report},
          {"k_requested", t.k_requested},
          {"k_used", t.k_used},
          {"degraded", t.degraded},
          {"llm_calls", calls},
          {"timings_ms", timings}};
}

}  // namespace chatcad
