#include "chatcad/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "chatcad/error.hpp"
#include "chatcad/text.hpp"

namespace chatcad {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool has_payload(const KnowledgeNode& n) {
  return (n.abstract && !n.abstract->empty()) || (n.content && !n.content->empty()) || !n.children.empty();
}

void check_siblings(const std::vector<KnowledgeNode>& nodes, const std::string& where) {
  std::set<std::string> seen;
  for (const auto& n : nodes) {
    if (trim(n.title).empty()) throw Error(ErrorCode::MalformedStructure, where + ": node without a title");
    if (!seen.insert(to_lower(n.title)).second) {
      throw Error(ErrorCode::DuplicateSiblingTitle, where + ": duplicate title '" + n.title + "'");
    }
  }
}

std::size_t validate_subtree(const KnowledgeNode& node, const std::string& where) {
  if (!has_payload(node)) {
    throw Error(ErrorCode::MalformedStructure, where + ": '" + node.title + "' has no abstract, content or children");
  }
  check_siblings(node.children, where + " > " + node.title);
  std::size_t count = 1;
  for (const auto& c : node.children) count += validate_subtree(c, where + " > " + node.title);
  return count;
}

int heading_level(std::string_view line, std::string& title) {
  int level = 0;
  while (level < static_cast<int>(line.size()) && line[static_cast<std::size_t>(level)] == '#') ++level;
  if (level == 0 || level > 6 || static_cast<std::size_t>(level) >= line.size() ||
      line[static_cast<std::size_t>(level)] != ' ') {
    return 0;
  }
  title = trim(line.substr(static_cast<std::size_t>(level)));
  while (!title.empty() && title.back() == '#') title.pop_back();
  title = trim(title);
  return level;
}

}  // namespace

std::string format_path(const NodePath& path) { return join(path, " > "); }

std::vector<KnowledgeNode> parse_markdown(std::string_view text, const std::string& source) {
  std::vector<KnowledgeNode> roots;
  // Open heading chain. The pointers stay valid: a node's children vector
  // only grows after all deeper frames have been popped.
  struct Open {
    int level;
    KnowledgeNode* node;
    bool is_abstract;
    KnowledgeNode* parent;
    std::string body;
  };
  std::vector<Open> stack;

  auto close_top = [&] {
    Open top = std::move(stack.back());
    stack.pop_back();
    auto body = trim(top.body);
    if (top.is_abstract) {
      if (top.parent->abstract) {
        throw Error(ErrorCode::DuplicateSiblingTitle, source + ": two abstract sections under '" + top.parent->title + "'");
      }
      top.parent->abstract = std::move(body);
    } else if (!body.empty()) {
      top.node->content = std::move(body);
    }
  };

  KnowledgeNode abstract_sink;  // placeholder node for open abstract sections
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string title;
    const int level = heading_level(line, title);
    if (level == 0) {
      if (stack.empty()) {
        if (!trim(line).empty()) throw Error(ErrorCode::MalformedStructure, source + ": text before the first heading");
        continue;
      }
      stack.back().body += line;
      stack.back().body.push_back('\n');
      continue;
    }
    if (title.empty()) throw Error(ErrorCode::MalformedStructure, source + ": empty heading");
    while (!stack.empty() && stack.back().level >= level) close_top();
    if (stack.empty()) {
      if (level != 1) throw Error(ErrorCode::MalformedStructure, source + ": first heading of a topic must be level 1");
      if (to_lower(title) == "abstract") throw Error(ErrorCode::MalformedStructure, source + ": topic titled 'abstract'");
      roots.push_back({title, std::nullopt, std::nullopt, {}});
      stack.push_back({1, &roots.back(), false, nullptr, {}});
      continue;
    }
    if (level != stack.back().level + 1) {
      throw Error(ErrorCode::MalformedStructure, source + ": heading '" + title + "' skips a level");
    }
    if (stack.back().is_abstract) {
      throw Error(ErrorCode::MalformedStructure, source + ": abstract sections cannot have subsections");
    }
    KnowledgeNode* parent = stack.back().node;
    if (to_lower(title) == "abstract") {
      stack.push_back({level, &abstract_sink, true, parent, {}});
    } else {
      parent->children.push_back({title, std::nullopt, std::nullopt, {}});
      stack.push_back({level, &parent->children.back(), false, parent, {}});
    }
  }
  while (!stack.empty()) close_top();
  return roots;
}

namespace {

KnowledgeNode node_from_json(const nlohmann::json& j, const std::string& source) {
  if (!j.is_object()) throw Error(ErrorCode::MalformedStructure, source + ": node must be an object");
  KnowledgeNode n;
  try {
    n.title = j.at("title").get<std::string>();
    if (j.contains("abstract") && !j["abstract"].is_null()) n.abstract = j["abstract"].get<std::string>();
    if (j.contains("content") && !j["content"].is_null()) n.content = j["content"].get<std::string>();
    if (j.contains("children")) {
      if (!j["children"].is_array()) throw Error(ErrorCode::MalformedStructure, source + ": children must be an array");
      for (const auto& c : j["children"]) n.children.push_back(node_from_json(c, source));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedStructure, source + ": " + e.what());
  }
  // A child literally called "abstract" maps onto the abstract field.
  for (auto it = n.children.begin(); it != n.children.end();) {
    if (to_lower(it->title) == "abstract" && it->children.empty()) {
      if (n.abstract) throw Error(ErrorCode::DuplicateSiblingTitle, source + ": two abstracts under '" + n.title + "'");
      n.abstract = it->content ? *it->content : it->abstract.value_or("");
      it = n.children.erase(it);
    } else {
      ++it;
    }
  }
  return n;
}

}  // namespace

std::vector<KnowledgeNode> parse_json_topics(const nlohmann::json& j, const std::string& source) {
  std::vector<KnowledgeNode> roots;
  if (j.is_array()) {
    for (const auto& t : j) roots.push_back(node_from_json(t, source));
  } else {
    roots.push_back(node_from_json(j, source));
  }
  return roots;
}

nlohmann::json to_json(const KnowledgeNode& node) {
  nlohmann::json j{{"title", node.title}};
  if (node.abstract) j["abstract"] = *node.abstract;
  if (node.content) j["content"] = *node.content;
  nlohmann::json children = nlohmann::json::array();
  for (const auto& c : node.children) children.push_back(to_json(c));
  j["children"] = std::move(children);
  return j;
}

// --- topic index --------------------------------------------------------------

namespace {
std::map<std::string, std::size_t> counts_of(const std::vector<std::string>& tokens) {
  std::map<std::string, std::size_t> c;
  for (const auto& t : tokens) ++c[t];
  return c;
}
}  // namespace

TopicIndex::TopicIndex(const std::vector<KnowledgeNode>& roots) {
  std::vector<std::map<std::string, std::size_t>> counts;
  std::vector<std::size_t> lengths;
  std::map<std::string, std::size_t> df;
  for (const auto& r : roots) {
    const auto tokens = tokenize(r.title + " " + r.abstract.value_or(""));
    counts.push_back(counts_of(tokens));
    lengths.push_back(tokens.size());
    for (const auto& [w, _] : counts.back()) ++df[w];
  }
  const auto n = static_cast<double>(roots.size());
  for (const auto& [w, f] : df) {
    vocab_.push_back(w);
    idf_.push_back(std::log(n / static_cast<double>(f)));
  }
  for (std::size_t d = 0; d < counts.size(); ++d) {
    std::vector<std::pair<std::size_t, double>> vec;
    double norm = 0.0;
    for (const auto& [w, c] : counts[d]) {
      const auto idx = static_cast<std::size_t>(std::lower_bound(vocab_.begin(), vocab_.end(), w) - vocab_.begin());
      const double v = static_cast<double>(c) / static_cast<double>(lengths[d]) * idf_[idx];
      if (v != 0.0) {
        vec.emplace_back(idx, v);
        norm += v * v;
      }
    }
    docs_.push_back(std::move(vec));
    norms_.push_back(std::sqrt(norm));
  }
}

std::vector<double> TopicIndex::scores(std::string_view query) const {
  std::vector<double> out(docs_.size(), 0.0);
  const auto tokens = tokenize(query);
  if (tokens.empty()) return out;
  std::map<std::size_t, double> q;
  for (const auto& [w, c] : counts_of(tokens)) {
    const auto it = std::lower_bound(vocab_.begin(), vocab_.end(), w);
    if (it == vocab_.end() || *it != w) continue;
    const auto idx = static_cast<std::size_t>(it - vocab_.begin());
    const double v = static_cast<double>(c) / static_cast<double>(tokens.size()) * idf_[idx];
    if (v != 0.0) q[idx] = v;
  }
  double qnorm = 0.0;
  for (const auto& [_, v] : q) qnorm += v * v;
  qnorm = std::sqrt(qnorm);
  if (qnorm == 0.0) return out;
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    if (norms_[d] == 0.0) continue;
    double dotp = 0.0;
    for (const auto& [idx, v] : docs_[d]) {
      const auto it = q.find(idx);
      if (it != q.end()) dotp += v * it->second;
    }
    out[d] = dotp / (qnorm * norms_[d]);
  }
  return out;
}

// --- tree -----------------------------------------------------------------------

KnowledgeTree::KnowledgeTree(std::vector<KnowledgeNode> roots) : roots_(std::move(roots)) {
  check_siblings(roots_, "topics");
  for (const auto& r : roots_) node_count_ += validate_subtree(r, "topics");
  topic_index_ = TopicIndex(roots_);
}

const KnowledgeNode& KnowledgeTree::lookup(const NodePath& path) const {
  if (path.empty()) throw Error(ErrorCode::PathNotFound, "empty path");
  const std::vector<KnowledgeNode>* tier = &roots_;
  const KnowledgeNode* node = nullptr;
  for (const auto& title : path) {
    const auto key = to_lower(title);
    const auto it = std::find_if(tier->begin(), tier->end(), [&](const KnowledgeNode& n) { return to_lower(n.title) == key; });
    if (it == tier->end()) throw Error(ErrorCode::PathNotFound, "no node at '" + format_path(path) + "'");
    node = &*it;
    tier = &node->children;
  }
  return *node;
}

std::vector<std::size_t> KnowledgeTree::candidate_indices(std::string_view query, std::size_t n) const {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "n must be at least 1");
  const auto s = topic_index_.scores(query);
  std::vector<std::size_t> order(roots_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  if (order.size() > n) order.resize(n);
  return order;
}

std::vector<std::string> KnowledgeTree::candidate_topics(std::string_view query, std::size_t n) const {
  std::vector<std::string> out;
  for (auto i : candidate_indices(query, n)) out.push_back(roots_[i].title);
  return out;
}

std::vector<NodePath> KnowledgeTree::all_paths() const {
  std::vector<NodePath> out;
  NodePath current;
  std::function<void(const KnowledgeNode&)> walk = [&](const KnowledgeNode& n) {
    current.push_back(n.title);
    out.push_back(current);
    for (const auto& c : n.children) walk(c);
    current.pop_back();
  };
  for (const auto& r : roots_) walk(r);
  return out;
}

nlohmann::json KnowledgeTree::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : roots_) arr.push_back(chatcad::to_json(r));
  return arr;
}

KnowledgeTree KnowledgeTree::from_json(const nlohmann::json& j) { return KnowledgeTree(parse_json_topics(j, "tree")); }

void KnowledgeTree::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

KnowledgeTree KnowledgeTree::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedStructure, path.string() + ": " + e.what());
  }
}

KnowledgeTree ingest(const std::vector<SourceDocument>& documents) {
  std::vector<KnowledgeNode> roots;
  for (const auto& doc : documents) {
    std::vector<KnowledgeNode> topics;
    if (doc.format == SourceFormat::Json) {
      if (trim(doc.text).empty()) throw Error(ErrorCode::EmptyDocument, doc.name + " is empty");
      try {
        topics = parse_json_topics(nlohmann::json::parse(doc.text), doc.name);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedStructure, doc.name + ": " + e.what());
      }
    } else {
      topics = parse_markdown(doc.text, doc.name);
    }
    if (topics.empty()) throw Error(ErrorCode::EmptyDocument, doc.name + " contains no topics");
    for (auto& t : topics) roots.push_back(std::move(t));
  }
  return KnowledgeTree(std::move(roots));
}

KnowledgeTree ingest_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = to_lower(e.path().extension().string());
    if (e.is_regular_file() && (ext == ".json" || ext == ".md")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SourceDocument> docs;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto ext = to_lower(f.extension().string());
    docs.push_back({f.filename().string(), ss.str(), ext == ".json" ? SourceFormat::Json : SourceFormat::Markdown});
  }
  return ingest(docs);
}

}  // namespace chatcad
