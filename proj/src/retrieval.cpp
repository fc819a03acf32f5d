#include "chatcad/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "chatcad/error.hpp"
#include "chatcad/text.hpp"

namespace chatcad {

std::string to_string(const NavigatorAction& a) {
  switch (a.kind) {
    case NavigatorAction::Kind::Select: return "select:" + std::to_string(a.child);
    case NavigatorAction::Kind::Found: return "found";
    case NavigatorAction::Kind::Back: return "back";
  }
  return "back";
}

std::string_view to_string(RetrievalOutcome o) noexcept {
  switch (o) {
    case RetrievalOutcome::Found: return "found";
    case RetrievalOutcome::Exhausted: return "exhausted";
    case RetrievalOutcome::BudgetStop: return "budget_stop";
  }
  return "exhausted";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n\"'`");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\"'`.");
  return e < b ? std::string{} : std::string(s.substr(b, e - b + 1));
}

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace

NavigatorAction parse_navigator_reply(std::string_view text, const std::vector<std::string>& titles) {
  const auto core = trim(text);
  if (all_digits(core)) {
    if (core.size() > 6) throw Error(ErrorCode::ParseFailure, "number out of range: " + core);
    const auto n = std::stoul(core);
    if (n < 1 || n > titles.size()) throw Error(ErrorCode::ParseFailure, "no choice numbered " + core);
    return NavigatorAction::select(n - 1);
  }
  const auto lowered = to_lower(core);
  for (std::size_t i = 0; i < titles.size(); ++i) {
    if (!titles[i].empty() && to_lower(titles[i]) == lowered) return NavigatorAction::select(i);
  }
  const auto tokens = tokenize(text);
  const bool found = std::find(tokens.begin(), tokens.end(), "found") != tokens.end();
  const bool back = std::find(tokens.begin(), tokens.end(), "back") != tokens.end();
  if (found && back) throw Error(ErrorCode::ParseFailure, "both FOUND and BACK in reply");
  if (found) return NavigatorAction::found();
  if (back) return NavigatorAction::back();
  const auto haystack = to_lower(text);
  std::optional<std::size_t> best;
  bool ambiguous = false;
  for (std::size_t i = 0; i < titles.size(); ++i) {
    const auto t = to_lower(titles[i]);
    if (t.empty() || haystack.find(t) == std::string::npos) continue;
    if (!best || t.size() > titles[*best].size()) {
      best = i;
      ambiguous = false;
    } else if (t.size() == titles[*best].size()) {
      ambiguous = true;
    }
  }
  if (best && !ambiguous) return NavigatorAction::select(*best);
  throw Error(ErrorCode::ParseFailure, "unrecognised reply: " + std::string(text.substr(0, 200)));
}

NavigatorAction parse_navigator_reply(std::string_view text, std::size_t child_count) {
  return parse_navigator_reply(text, std::vector<std::string>(child_count));
}

// --- navigators -----------------------------------------------------------------

ScriptedNavigator::ScriptedNavigator(std::vector<std::string> replies) : replies_(std::move(replies)) {}

ScriptedNavigator ScriptedNavigator::from_json(const nlohmann::json& actions) {
  if (!actions.is_array()) throw Error(ErrorCode::ConfigError, "navigator script must be a JSON array");
  std::vector<std::string> replies;
  for (const auto& a : actions) {
    if (a.is_number_unsigned() || (a.is_number_integer() && a.get<long long>() >= 0)) {
      replies.push_back(std::to_string(a.get<std::size_t>() + 1));
    } else if (a.is_string()) {
      replies.push_back(a.get<std::string>());
    } else {
      throw Error(ErrorCode::ConfigError, "navigator script entries must be indices or strings");
    }
  }
  return ScriptedNavigator(std::move(replies));
}

ScriptedNavigator ScriptedNavigator::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

std::string ScriptedNavigator::reply(const NavigatorTurn&) {
  if (next_ < replies_.size()) return replies_[next_++];
  return "BACK";
}

LlmNavigator::LlmNavigator(LlmClient& llm, CallSettings settings) : llm_(llm), settings_(settings) {}

std::string LlmNavigator::reply(const NavigatorTurn& turn) {
  auto prompt = turn.prompt;
  if (turn.attempt > 0) prompt += "\nYour previous reply could not be understood. Answer with one of the allowed forms only.";
  auto request = user_request(std::move(prompt), "navigator");
  request.temperature = settings_.temperature;
  request.max_tokens = settings_.max_tokens;
  return llm_.complete(request);
}

RandomNavigator::RandomNavigator(std::uint64_t seed) : rng_(seed) {}

std::string RandomNavigator::reply(const NavigatorTurn& turn) {
  std::uniform_int_distribution<int> kind(0, 4);
  const auto n = turn.children.size();
  switch (kind(rng_)) {
    case 0:
      if (n > 0) return std::to_string(std::uniform_int_distribution<std::size_t>(1, n)(rng_));
      return "FOUND";
    case 1: return std::to_string(n + 1 + std::uniform_int_distribution<std::size_t>(0, 3)(rng_));
    case 2: return "FOUND";
    case 3: return "BACK";
    default: return "hmm, not sure";
  }
}

// --- prompt ---------------------------------------------------------------------

std::string format_choice_prompt(std::string_view query, const KnowledgeNode* node,
                                 const std::vector<std::string>& children, const std::vector<bool>& tried,
                                 const PromptTemplates& templates, const NodePath& path) {
  std::string location = node ? format_path(path.empty() ? NodePath{node->title} : path) : "list of topics";
  std::string about;
  if (node) {
    if (node->abstract && !node->abstract->empty()) about += "Abstract: " + *node->abstract + "\n";
    if (children.empty() && node->content) about += "Content: " + *node->content + "\n";
  }
  std::string choices;
  for (std::size_t i = 0; i < children.size(); ++i) {
    choices += std::to_string(i + 1) + ". " + children[i];
    if (i < tried.size() && tried[i]) choices += " (already visited)";
    choices += "\n";
  }
  std::string forms;
  if (!node) {
    choices = "Topics:\n" + choices;
    forms = "Reply with the number of the most relevant topic, or BACK to skip to the next one.";
  } else if (children.empty()) {
    choices = "This section has no subsections.";
    forms = "Reply FOUND if this section answers the question, or BACK to return to the previous tier.";
  } else {
    choices = "Sections:\n" + choices;
    forms =
        "Reply with the number of the section to open, FOUND if the current text answers the question, or BACK to "
        "return to the previous tier.";
  }
  while (!about.empty() && about.back() == '\n') about.pop_back();
  while (!choices.empty() && choices.back() == '\n') choices.pop_back();
  return templates.get(PromptTemplates::kNavigator)
      .render({{"query", std::string(query)},
               {"location", location},
               {"abstract", about},
               {"choices", choices},
               {"reply_forms", forms}});
}

std::string found_payload(const KnowledgeNode& node) {
  if (node.content && !node.content->empty()) return *node.content;
  std::vector<std::string> parts;
  if (node.abstract && !node.abstract->empty()) parts.push_back(*node.abstract);
  for (const auto& c : node.children) {
    if (c.abstract && !c.abstract->empty()) parts.push_back(c.title + ": " + *c.abstract);
  }
  return join(parts, "\n\n");
}

// --- search ---------------------------------------------------------------------

namespace {

struct Frame {
  const KnowledgeNode* node;  // nullptr: topic list
  NodePath path;
  std::vector<const KnowledgeNode*> children;
  std::vector<bool> tried;
};

std::vector<std::string> titles_of(const Frame& f) {
  std::vector<std::string> out;
  for (const auto* c : f.children) out.push_back(c->title);
  return out;
}

}  // namespace

RetrievalTrace retrieve_knowledge(std::string_view query, const KnowledgeTree& tree, Navigator& navigator,
                                  const PromptTemplates& templates, RetrievalOptions options) {
  if (options.budget < 1) throw Error(ErrorCode::InvalidArgument, "budget must be at least 1");
  if (options.max_depth < 1) throw Error(ErrorCode::InvalidArgument, "max_depth must be at least 1");
  if (options.parse_retries < 0) throw Error(ErrorCode::InvalidArgument, "parse_retries must be non-negative");

  RetrievalTrace trace;
  trace.query = std::string(query);
  if (tree.roots().empty()) return trace;

  Frame topics{nullptr, {}, {}, {}};
  for (auto i : tree.candidate_indices(query, std::max<std::size_t>(options.candidates, 1))) {
    topics.children.push_back(&tree.roots()[i]);
    trace.candidates.push_back(tree.roots()[i].title);
  }
  topics.tried.assign(topics.children.size(), false);

  std::vector<Frame> stack{topics};
  NodePath deepest;
  auto enter = [&](std::size_t i) {
    Frame& parent = stack.back();
    parent.tried[i] = true;
    const KnowledgeNode* child = parent.children[i];
    NodePath path = parent.path;
    path.push_back(child->title);
    Frame f{child, path, {}, {}};
    for (const auto& c : child->children) f.children.push_back(&c);
    f.tried.assign(f.children.size(), false);
    trace.visited.push_back(path);
    if (path.size() > deepest.size()) deepest = path;
    stack.push_back(std::move(f));
  };
  auto back = [&] {
    if (stack.size() > 1) {
      stack.pop_back();
      return;
    }
    const auto& tried = stack.back().tried;
    const auto next = std::find(tried.begin(), tried.end(), false);
    if (next != tried.end()) enter(static_cast<std::size_t>(next - tried.begin()));
  };

  if (topics.children.size() == 1) enter(0);

  while (true) {
    Frame& top = stack.back();
    if (!top.node && std::all_of(top.tried.begin(), top.tried.end(), [](bool t) { return t; })) {
      trace.outcome = RetrievalOutcome::Exhausted;
      return trace;
    }
    if (trace.steps.size() >= options.budget) {
      trace.outcome = RetrievalOutcome::BudgetStop;
      break;
    }

    NavigatorTurn turn;
    turn.query = std::string(query);
    turn.path = top.path;
    turn.children = titles_of(top);
    turn.tried = top.tried;
    turn.prompt = format_choice_prompt(query, top.node, turn.children, turn.tried, templates, top.path);

    RetrievalStep step;
    step.path = top.path;
    step.presented_children = turn.children;
    std::optional<NavigatorAction> parsed;
    try {
      for (int attempt = 0; attempt <= options.parse_retries && !parsed; ++attempt) {
        turn.attempt = attempt;
        step.attempts = attempt + 1;
        step.raw_reply = navigator.reply(turn);
        try {
          parsed = parse_navigator_reply(step.raw_reply, turn.children);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::ParseFailure) throw;
        }
      }
    } catch (const Error& e) {
      trace.error = e.what();
      trace.outcome = RetrievalOutcome::BudgetStop;
      break;
    }
    if (!parsed) step.note = "parse_failure";
    step.action = parsed.value_or(NavigatorAction::back());
    const auto action = step.action;

    bool done = false;
    switch (action.kind) {
      case NavigatorAction::Kind::Select:
        if (top.tried[action.child]) {
          step.note = "already_visited";
          back();
        } else if (top.path.size() + 1 > options.max_depth) {
          step.note = "depth_limit";
          back();
        } else {
          enter(action.child);
        }
        break;
      case NavigatorAction::Kind::Found:
        if (!top.node) {
          step.note = "found_at_topic_list";
          back();
        } else if (auto payload = found_payload(*top.node); payload.empty()) {
          step.note = "empty_payload";
          back();
        } else {
          trace.outcome = RetrievalOutcome::Found;
          trace.found_path = top.path;
          trace.knowledge = std::move(payload);
          done = true;
        }
        break;
      case NavigatorAction::Kind::Back:
        if (!top.node && step.note.empty()) step.note = "next_topic";
        back();
        break;
    }
    trace.steps.push_back(std::move(step));
    if (done) return trace;
  }

  // Budget stop: abstracts along the deepest path entered.
  trace.low_confidence = true;
  std::vector<std::string> parts;
  for (std::size_t len = 1; len <= deepest.size(); ++len) {
    const auto& node = tree.lookup(NodePath(deepest.begin(), deepest.begin() + static_cast<std::ptrdiff_t>(len)));
    if (node.abstract && !node.abstract->empty()) parts.push_back(*node.abstract);
  }
  if (!parts.empty()) trace.knowledge = join(parts, "\n\n");
  return trace;
}

nlohmann::json to_json(const RetrievalTrace& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps) {
    nlohmann::json action{{"kind", s.action.kind == NavigatorAction::Kind::Select  ? "select"
                                   : s.action.kind == NavigatorAction::Kind::Found ? "found"
                                                                                   : "back"}};
    if (s.action.kind == NavigatorAction::Kind::Select) action["child"] = s.action.child;
    steps.push_back({{"path", s.path},
                     {"presented_children", s.presented_children},
                     {"action", action},
                     {"raw_reply", s.raw_reply},
                     {"attempts", s.attempts},
                     {"note", s.note}});
  }
  return {{"kind", "retrieval"},
          {"schema_version", kRetrievalSchemaVersion},
          {"query", t.query},
          {"candidates", t.candidates},
          {"steps", steps},
          {"visited", t.visited},
          {"outcome", to_string(t.outcome)},
          {"found_path", t.found_path ? nlohmann::json(*t.found_path) : nlohmann::json()},
          {"knowledge", t.knowledge ? nlohmann::json(*t.knowledge) : nlohmann::json()},
          {"low_confidence", t.low_confidence},
          {"error", t.error ? nlohmann::json(*t.error) : nlohmann::json()}};
}

// --- answers --------------------------------------------------------------------

namespace {
std::string ask(LlmClient& llm, std::string prompt, const char* tag, std::vector<LlmExchange>* log,
                CallSettings settings) {
  auto request = user_request(prompt, tag);
  request.temperature = settings.temperature;
  request.max_tokens = settings.max_tokens;
  auto answer = llm.complete(request);
  if (log) log->push_back({tag, std::move(prompt), answer});
  return answer;
}
}  // namespace

std::string answer_with_knowledge(std::string_view query, std::string_view knowledge, LlmClient& llm,
                                  const PromptTemplates& templates, std::vector<LlmExchange>* log,
                                  CallSettings settings) {
  if (knowledge.empty()) throw Error(ErrorCode::PreconditionViolation, "no knowledge to ground the answer");
  auto prompt = templates.get(PromptTemplates::kGroundedAnswer)
                    .render({{"query", std::string(query)}, {"knowledge", std::string(knowledge)}});
  return ask(llm, std::move(prompt), "grounded_answer", log, settings);
}

std::string answer_ungrounded(std::string_view query, LlmClient& llm, const PromptTemplates& templates,
                              std::vector<LlmExchange>* log, CallSettings settings) {
  auto prompt = templates.get(PromptTemplates::kUngroundedAnswer).render({{"query", std::string(query)}});
  return ask(llm, std::move(prompt), "ungrounded_answer", log, settings);
}

}  // namespace chatcad
