#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chatcad/domain.hpp"

namespace chatcad {

enum class PromptStyle { P1Direct, P2Simplistic, P3Illustrative };

std::string_view to_string(PromptStyle style) noexcept;
/// Accepts "P1"/"P2"/"P3" (any case) and the long names "direct", "simplistic", "illustrative".
std::optional<PromptStyle> parse_prompt_style(std::string_view text) noexcept;

/// One line per finding, in CadOutput order.
struct VisualDescription {
  std::string domain_id;
  std::vector<std::string> lines;

  bool operator==(const VisualDescription&) const = default;
};

/// Phrase for a single finding. Bucket boundaries belong to the higher bucket;
/// 1.0 falls in the top bucket. P1 renders the probability with three decimals.
std::string describe_finding(const Finding& finding, PromptStyle style);

/// Throws ProbOutOfRange when any probability is outside [0,1].
VisualDescription prob2text(const CadOutput& output, PromptStyle style);

/// Header line followed by the finding lines, newline separated.
std::string render(const VisualDescription& description, std::string_view header);

}  // namespace chatcad
