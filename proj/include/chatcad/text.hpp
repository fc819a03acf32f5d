#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace chatcad {

/// Lowercases ASCII letters, splits on any run of non-alphanumeric bytes and
/// drops empty tokens. "X-ray x RAY" -> {x, ray, x, ray}.
std::vector<std::string> tokenize(std::string_view text);

std::string to_lower(std::string_view text);

/// Splits on sentence punctuation (. ; ! ? and newlines); pieces keep their text.
std::vector<std::string_view> split_sentences(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Counts non-overlapping occurrences of `phrase` (a token sequence) in
/// `tokens`, scanning left to right.
std::size_t count_phrase(const std::vector<std::string>& phrase,
                         const std::vector<std::string>& tokens);

}  // namespace chatcad
