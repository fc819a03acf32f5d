#include "chatcad/prob2text.hpp"

#include <cstdio>

#include "chatcad/error.hpp"
#include "chatcad/text.hpp"

namespace chatcad {

std::string_view to_string(PromptStyle style) noexcept {
  switch (style) {
    case PromptStyle::P1Direct: return "P1";
    case PromptStyle::P2Simplistic: return "P2";
    case PromptStyle::P3Illustrative: return "P3";
  }
  return "P3";
}

std::optional<PromptStyle> parse_prompt_style(std::string_view text) noexcept {
  const auto lower = to_lower(text);
  if (lower == "p1" || lower == "direct") return PromptStyle::P1Direct;
  if (lower == "p2" || lower == "simplistic") return PromptStyle::P2Simplistic;
  if (lower == "p3" || lower == "illustrative") return PromptStyle::P3Illustrative;
  return std::nullopt;
}

std::string describe_finding(const Finding& finding, PromptStyle style) {
  const double p = finding.prob;
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::ProbOutOfRange, "probability for '" + finding.disease + "' outside [0,1]");
  }
  const std::string& disease = finding.disease;
  switch (style) {
    case PromptStyle::P1Direct: {
      // glibc printf rounds the exact binary value, ties to even
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", p);
      return disease + " score: " + buf;
    }
    case PromptStyle::P2Simplistic:
      if (p < 0.5) return "No Finding";
      return "The prediction is " + disease;
    case PromptStyle::P3Illustrative:
      if (p < 0.2) return "No sign of " + disease;
      if (p < 0.5) return "Small possibility of " + disease;
      if (p < 0.9) return "Patient is likely to have " + disease;
      return "Definitely have " + disease;
  }
  return {};
}

VisualDescription prob2text(const CadOutput& output, PromptStyle style) {
  VisualDescription d;
  d.domain_id = output.domain_id;
  d.lines.reserve(output.findings.size());
  for (const auto& f : output.findings) d.lines.push_back(describe_finding(f, style));
  return d;
}

std::string render(const VisualDescription& description, std::string_view header) {
  std::string out(header);
  for (const auto& line : description.lines) {
    if (!out.empty()) out.push_back('\n');
    out.append(line);
  }
  return out;
}

}  // namespace chatcad
