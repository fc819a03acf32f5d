#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace chatcad {

/// Topic, section or subsection of the knowledge dictionary.
struct KnowledgeNode {
  std::string title;
  std::optional<std::string> abstract;
  std::optional<std::string> content;
  std::vector<KnowledgeNode> children;

  bool operator==(const KnowledgeNode&) const = default;
};

/// Titles from a root topic down to a node.
using NodePath = std::vector<std::string>;

std::string format_path(const NodePath& path);

enum class SourceFormat { Json, Markdown };

struct SourceDocument {
  std::string name;
  std::string text;
  SourceFormat format = SourceFormat::Markdown;
};

/// Heading level = tier. A section titled "abstract" becomes its parent's
/// abstract; body text under any other heading becomes that node's content.
std::vector<KnowledgeNode> parse_markdown(std::string_view text, const std::string& source = "markdown");

/// {"title", "abstract"?, "content"?, "children"?: [...]} or an array of them.
std::vector<KnowledgeNode> parse_json_topics(const nlohmann::json& j, const std::string& source = "json");

/// Lexical TF-IDF (natural log) over each root's title + abstract.
class TopicIndex {
 public:
  TopicIndex() = default;
  explicit TopicIndex(const std::vector<KnowledgeNode>& roots);

  /// Cosine score of the query against every root, in root order.
  [[nodiscard]] std::vector<double> scores(std::string_view query) const;
  [[nodiscard]] std::size_t size() const noexcept { return docs_.size(); }

 private:
  std::vector<std::string> vocab_;  // sorted
  std::vector<double> idf_;
  std::vector<std::vector<std::pair<std::size_t, double>>> docs_;  // sparse, sorted by term
  std::vector<double> norms_;
};

/// Immutable hierarchical dictionary. Root titles are unique; sibling titles
/// are unique case-insensitively.
class KnowledgeTree {
 public:
  KnowledgeTree() = default;
  /// Throws DuplicateSiblingTitle or MalformedStructure.
  explicit KnowledgeTree(std::vector<KnowledgeNode> roots);

  [[nodiscard]] const std::vector<KnowledgeNode>& roots() const noexcept { return roots_; }
  [[nodiscard]] std::size_t node_count() const noexcept { return node_count_; }

  /// Case-insensitive, tier by tier. Throws PathNotFound.
  [[nodiscard]] const KnowledgeNode& lookup(const NodePath& path) const;

  /// Indices of the top-n roots by lexical similarity; ties keep root order.
  [[nodiscard]] std::vector<std::size_t> candidate_indices(std::string_view query, std::size_t n = 5) const;
  [[nodiscard]] std::vector<std::string> candidate_topics(std::string_view query, std::size_t n = 5) const;

  /// Every node's path in preorder.
  [[nodiscard]] std::vector<NodePath> all_paths() const;

  [[nodiscard]] nlohmann::json to_json() const;
  static KnowledgeTree from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static KnowledgeTree load(const std::filesystem::path& path);

 private:
  std::vector<KnowledgeNode> roots_;
  TopicIndex topic_index_;
  std::size_t node_count_ = 0;
};

/// One root per topic across all documents. Throws EmptyDocument for a
/// document without topics.
KnowledgeTree ingest(const std::vector<SourceDocument>& documents);

/// Reads *.json and *.md files (sorted by file name) from a directory.
KnowledgeTree ingest_directory(const std::filesystem::path& dir);

nlohmann::json to_json(const KnowledgeNode& node);

}  // namespace chatcad
