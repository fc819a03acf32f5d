#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chatcad/kdtree.hpp"
#include "chatcad/tfidf.hpp"

namespace chatcad {

struct CorpusDoc {
  std::string doc_id;
  std::string text;
};

/// Corpus file: one {"id": str, "text": str} object per line.
std::vector<CorpusDoc> load_corpus_ndjson(const std::filesystem::path& path);

struct ReportRecord {
  std::uint32_t id = 0;  // position in the input corpus
  std::string doc_id;
  std::string text;
  std::vector<double> tie;
  std::vector<double> point;
};

struct RetrievedReport {
  const ReportRecord* record = nullptr;
  double distance = 0.0;
};

/// Term-restricted TF-IDF embeddings projected onto the unit sphere and
/// stored in a KD-tree. Immutable once built; queries need no locking.
class ReportIndex {
 public:
  /// Throws EmptyCorpus, or AllDocumentsEmpty when every TIE is zero.
  static ReportIndex build(const std::vector<CorpusDoc>& corpus, TermSet terms);
  static ReportIndex build(const std::vector<std::string>& texts, TermSet terms);

  /// Top-k by cosine (= ascending L2 on the sphere), ties by lower record id.
  /// Throws ZeroEmbedding when the query has no term-set occurrences,
  /// InvalidArgument when k == 0.
  [[nodiscard]] std::vector<RetrievedReport> query_top_k(const std::string& query_text, std::size_t k,
                                                         SearchStats* stats = nullptr) const;
  /// Parallel over queries; a zero-embedding query yields an empty row.
  [[nodiscard]] std::vector<std::vector<RetrievedReport>> query_batch(const std::vector<std::string>& queries,
                                                                      std::size_t k) const;

  [[nodiscard]] std::vector<double> embed(const std::string& text) const;

  [[nodiscard]] const TermSet& terms() const noexcept { return terms_; }
  [[nodiscard]] const CorpusStats& stats() const noexcept { return stats_; }
  [[nodiscard]] const std::vector<ReportRecord>& records() const noexcept { return records_; }
  [[nodiscard]] const KdTree& tree() const noexcept { return tree_; }
  [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
  [[nodiscard]] std::size_t excluded_count() const noexcept { return excluded_; }
  [[nodiscard]] const ReportRecord& record(std::uint32_t id) const;

  [[nodiscard]] nlohmann::json to_json() const;
  static ReportIndex from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static ReportIndex load(const std::filesystem::path& path);

 private:
  ReportIndex(TermSet terms) : terms_(std::move(terms)) {}

  TermSet terms_;
  CorpusStats stats_;
  std::vector<ReportRecord> records_;  // ascending id
  std::size_t excluded_ = 0;
  KdTree tree_;                         // point i corresponds to records_[i]
};

}  // namespace chatcad
