#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chatcad/knowledge.hpp"
#include "chatcad/llm.hpp"
#include "chatcad/pipeline.hpp"
#include "chatcad/templates.hpp"

namespace chatcad {

inline constexpr int kRetrievalSchemaVersion = 1;

struct NavigatorAction {
  enum class Kind { Select, Found, Back };
  Kind kind = Kind::Back;
  std::size_t child = 0;  // zero-based, Select only

  static NavigatorAction select(std::size_t i) { return {Kind::Select, i}; }
  static NavigatorAction found() { return {Kind::Found, 0}; }
  static NavigatorAction back() { return {Kind::Back, 0}; }
  bool operator==(const NavigatorAction&) const = default;
};

std::string to_string(const NavigatorAction& action);

/// Reply grammar, first match wins: a bare integer 1..n; the whole reply
/// equal to a child title; a "found" or "back" token; a child title quoted
/// inside the reply. Throws ParseFailure otherwise.
NavigatorAction parse_navigator_reply(std::string_view text, const std::vector<std::string>& child_titles);
NavigatorAction parse_navigator_reply(std::string_view text, std::size_t child_count);

/// What the navigator sees at one step. An empty path is the topic list.
struct NavigatorTurn {
  std::string query;
  NodePath path;
  std::vector<std::string> children;
  std::vector<bool> tried;
  std::string prompt;
  int attempt = 0;  // > 0 when re-asking after an unparseable reply
};

class Navigator {
 public:
  virtual ~Navigator() = default;
  virtual std::string reply(const NavigatorTurn& turn) = 0;
};

/// Fixed replies in order, then "BACK" forever.
class ScriptedNavigator final : public Navigator {
 public:
  explicit ScriptedNavigator(std::vector<std::string> replies);
  /// JSON list: integers are zero-based Select indices; strings are sent
  /// verbatim ("found", "back", "2", a title, ...).
  static ScriptedNavigator from_json(const nlohmann::json& actions);
  static ScriptedNavigator load(const std::filesystem::path& path);

  std::string reply(const NavigatorTurn& turn) override;
  [[nodiscard]] std::size_t used() const noexcept { return next_; }

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

/// Sends the choice prompt to an LLM.
class LlmNavigator final : public Navigator {
 public:
  explicit LlmNavigator(LlmClient& llm, CallSettings settings = {});
  std::string reply(const NavigatorTurn& turn) override;

 private:
  LlmClient& llm_;
  CallSettings settings_;
};

/// Uniform over {valid number, out-of-range number, FOUND, BACK, noise}.
class RandomNavigator final : public Navigator {
 public:
  explicit RandomNavigator(std::uint64_t seed);
  std::string reply(const NavigatorTurn& turn) override;

 private:
  std::mt19937_64 rng_;
};

/// Choice prompt for one node; `node == nullptr` is the topic list.
std::string format_choice_prompt(std::string_view query, const KnowledgeNode* node,
                                 const std::vector<std::string>& children, const std::vector<bool>& tried,
                                 const PromptTemplates& templates, const NodePath& path = {});

struct RetrievalStep {
  NodePath path;
  std::vector<std::string> presented_children;
  NavigatorAction action;
  std::string raw_reply;
  int attempts = 1;
  std::string note;  // why an action was rewritten, if it was
};

enum class RetrievalOutcome { Found, Exhausted, BudgetStop };
std::string_view to_string(RetrievalOutcome outcome) noexcept;

struct RetrievalTrace {
  std::string query;
  std::vector<std::string> candidates;
  std::vector<RetrievalStep> steps;
  std::vector<NodePath> visited;  // in entry order
  RetrievalOutcome outcome = RetrievalOutcome::Exhausted;
  std::optional<NodePath> found_path;
  std::optional<std::string> knowledge;
  bool low_confidence = false;
  std::optional<std::string> error;
};

nlohmann::json to_json(const RetrievalTrace& trace);

struct RetrievalOptions {
  std::size_t budget = 30;
  std::size_t max_depth = 5;  // longest NodePath that may be entered
  std::size_t candidates = 5;
  int parse_retries = 2;
};

/// Depth-first search with backtracking from the candidate topics. The topic
/// list is presented as its own step unless there is a single candidate; Back
/// there moves on to the next untried topic. Never revisits a node.
RetrievalTrace retrieve_knowledge(std::string_view query, const KnowledgeTree& tree, Navigator& navigator,
                                  const PromptTemplates& templates, RetrievalOptions options = {});

/// Knowledge returned by Found at `node`.
std::string found_payload(const KnowledgeNode& node);

/// Throws PreconditionViolation on empty knowledge.
std::string answer_with_knowledge(std::string_view query, std::string_view knowledge, LlmClient& llm,
                                  const PromptTemplates& templates, std::vector<LlmExchange>* log = nullptr,
                                  CallSettings settings = {});
std::string answer_ungrounded(std::string_view query, LlmClient& llm, const PromptTemplates& templates,
                              std::vector<LlmExchange>* log = nullptr, CallSettings settings = {});

}  // namespace chatcad
