#include "chatcad/templates.hpp"

#include <fstream>
#include <sstream>

#include "chatcad/error.hpp"

namespace chatcad {

const char* const kDefaultTemplateText = R"(# Prompt templates. "[[name]]" starts a section; placeholders are {name}.

[[visual_header]]
Results from the {domain} network(s):

[[preliminary_report]]
{visual_description}
Write a report based on results from Network(s).

[[example_block]]
Example report {index}:
{example}

[[refine_report]]
Here is a preliminary radiology report:
{preliminary_report}

The following reports were written by radiologists for semantically similar cases:
{examples}
Refine the preliminary report using the reference reports above. Keep every finding of the preliminary report that the references support, adopt their wording and structure, and output only the final report.

[[navigator_choice]]
You are searching a medical knowledge base to answer a question.
Question: {query}
Current location: {location}
{abstract}
{choices}
{reply_forms}

[[grounded_answer]]
Answer the question using the retrieved medical knowledge. Cite only facts contained in it.
Knowledge:
{knowledge}

Question: {query}

[[ungrounded_answer]]
No reference knowledge was found for this question. Answer it carefully and advise consulting a clinician.
Question: {query}
)";

namespace {

struct SectionSpec {
  std::set<std::string> allowed;
  std::set<std::string> required;
};

const std::map<std::string, SectionSpec>& section_specs() {
  static const std::map<std::string, SectionSpec> specs{
      {PromptTemplates::kVisualHeader, {{"domain"}, {}}},
      {PromptTemplates::kPreliminary, {{"visual_description", "domain"}, {"visual_description"}}},
      {PromptTemplates::kExampleBlock, {{"index", "example"}, {"example"}}},
      {PromptTemplates::kRefine, {{"preliminary_report", "examples", "visual_description"}, {"preliminary_report", "examples"}}},
      {PromptTemplates::kNavigator,
       {{"query", "location", "abstract", "choices", "reply_forms"}, {"query", "choices", "reply_forms"}}},
      {PromptTemplates::kGroundedAnswer, {{"query", "knowledge"}, {"query", "knowledge"}}},
      {PromptTemplates::kUngroundedAnswer, {{"query"}, {"query"}}},
  };
  return specs;
}

// Calls on_text for literal runs and on_placeholder for {name} references.
template <class Text, class Placeholder>
void scan(const std::string& name, const std::string& body, Text on_text, Placeholder on_placeholder) {
  std::size_t i = 0;
  while (i < body.size()) {
    const char c = body[i];
    if (c == '{' && i + 1 < body.size() && body[i + 1] == '{') {
      on_text("{");
      i += 2;
    } else if (c == '}' && i + 1 < body.size() && body[i + 1] == '}') {
      on_text("}");
      i += 2;
    } else if (c == '{') {
      const auto end = body.find('}', i);
      if (end == std::string::npos) throw Error(ErrorCode::TemplateError, name + ": unterminated placeholder");
      const auto key = body.substr(i + 1, end - i - 1);
      if (key.empty() || key.find_first_of("{ \n") != std::string::npos) {
        throw Error(ErrorCode::TemplateError, name + ": malformed placeholder '{" + key + "}'");
      }
      on_placeholder(key);
      i = end + 1;
    } else if (c == '}') {
      throw Error(ErrorCode::TemplateError, name + ": stray '}'");
    } else {
      const auto next = body.find_first_of("{}", i);
      const auto stop = next == std::string::npos ? body.size() : next;
      on_text(std::string_view(body).substr(i, stop - i));
      i = stop;
    }
  }
}

}  // namespace

PromptTemplate::PromptTemplate(std::string name, std::string body) : name_(std::move(name)), body_(std::move(body)) {
  scan(name_, body_, [](std::string_view) {}, [&](const std::string& key) { placeholders_.insert(key); });
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  out.reserve(body_.size() * 2);
  scan(
      name_, body_, [&](std::string_view t) { out.append(t); },
      [&](const std::string& key) {
        const auto it = values.find(key);
        if (it == values.end()) throw Error(ErrorCode::TemplateError, name_ + ": no value for {" + key + "}");
        out.append(it->second);
      });
  return out;
}

PromptTemplates::PromptTemplates(std::map<std::string, PromptTemplate> sections) : sections_(std::move(sections)) {
  const auto& specs = section_specs();
  for (const auto& [name, tpl] : sections_) {
    const auto spec = specs.find(name);
    if (spec == specs.end()) throw Error(ErrorCode::TemplateError, "unknown template section '" + name + "'");
    for (const auto& p : tpl.placeholders()) {
      if (!spec->second.allowed.count(p)) {
        throw Error(ErrorCode::TemplateError, name + ": unknown placeholder {" + p + "}");
      }
    }
    for (const auto& p : spec->second.required) {
      if (!tpl.placeholders().count(p)) {
        throw Error(ErrorCode::TemplateError, name + ": missing required placeholder {" + p + "}");
      }
    }
  }
}

PromptTemplates PromptTemplates::parse_sections(std::string_view text) {
  std::map<std::string, PromptTemplate> sections;
  std::istringstream in{std::string(text)};
  std::string line, current, body;
  bool in_section = false;
  auto flush = [&] {
    if (!in_section) return;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    if (sections.count(current)) throw Error(ErrorCode::TemplateError, "duplicate section '" + current + "'");
    sections.emplace(current, PromptTemplate(current, body));
    body.clear();
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() > 4 && line.rfind("[[", 0) == 0 && line.substr(line.size() - 2) == "]]") {
      flush();
      current = line.substr(2, line.size() - 4);
      in_section = true;
      continue;
    }
    if (!in_section) {
      if (line.empty() || line[0] == '#') continue;
      throw Error(ErrorCode::TemplateError, "text before the first section header");
    }
    body += line;
    body.push_back('\n');
  }
  flush();
  return PromptTemplates(std::move(sections));
}

PromptTemplates PromptTemplates::defaults() {
  static const PromptTemplates d = parse_sections(kDefaultTemplateText);
  return d;
}

PromptTemplates PromptTemplates::parse(std::string_view text) {
  auto parsed = parse_sections(text);
  for (const auto& [name, tpl] : defaults().sections_) parsed.sections_.emplace(name, tpl);
  return parsed;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open template file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const PromptTemplate& PromptTemplates::get(const std::string& name) const {
  const auto it = sections_.find(name);
  if (it == sections_.end()) throw Error(ErrorCode::TemplateError, "no template section '" + name + "'");
  return it->second;
}

}  // namespace chatcad
