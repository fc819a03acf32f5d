#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace chatcad {

/// A prompt body with {name} placeholders; "{{" and "}}" are literal braces.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  PromptTemplate(std::string name, std::string body);

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] const std::string& body() const noexcept { return body_; }
  [[nodiscard]] const std::set<std::string>& placeholders() const noexcept { return placeholders_; }

  /// Throws TemplateError when a referenced placeholder has no value.
  [[nodiscard]] std::string render(const std::map<std::string, std::string>& values) const;

 private:
  std::string name_;
  std::string body_;
  std::set<std::string> placeholders_;
};

/// Named prompt sections. File syntax: a line "[[section_name]]" starts a
/// section; its body runs to the next header with trailing blank lines
/// trimmed. Lines starting with "#" before the first header are comments.
class PromptTemplates {
 public:
  /// Built-in defaults, identical to config/templates.txt.
  static PromptTemplates defaults();
  static PromptTemplates parse(std::string_view text);
  static PromptTemplates load(const std::filesystem::path& path);

  [[nodiscard]] const PromptTemplate& get(const std::string& name) const;

  static constexpr const char* kVisualHeader = "visual_header";
  static constexpr const char* kPreliminary = "preliminary_report";
  static constexpr const char* kRefine = "refine_report";
  static constexpr const char* kExampleBlock = "example_block";
  static constexpr const char* kNavigator = "navigator_choice";
  static constexpr const char* kGroundedAnswer = "grounded_answer";
  static constexpr const char* kUngroundedAnswer = "ungrounded_answer";

 private:
  /// Sections missing from `sections` are filled from the defaults; unknown
  /// sections, unknown placeholders and missing required ones are errors.
  explicit PromptTemplates(std::map<std::string, PromptTemplate> sections);
  static PromptTemplates parse_sections(std::string_view text);

  std::map<std::string, PromptTemplate> sections_;
};

extern const char* const kDefaultTemplateText;

}  // namespace chatcad
