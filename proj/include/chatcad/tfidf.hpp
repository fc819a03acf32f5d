#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chatcad {

/// Ordered clinical vocabulary the TF-IDF embedding is restricted to. Terms
/// may be multi-word phrases; they are stored lowercased and tokenized.
class TermSet {
 public:
  /// Throws InvalidTermSet on empty input, empty terms or duplicates.
  explicit TermSet(const std::vector<std::string>& terms);

  /// 17 thoracic observation terms used when no term file is supplied.
  static TermSet default_thoracic();
  /// One term per line; blank lines and lines starting with '#' are skipped.
  static TermSet load(const std::filesystem::path& path);

  [[nodiscard]] std::size_t size() const noexcept { return terms_.size(); }
  [[nodiscard]] const std::vector<std::string>& terms() const noexcept { return terms_; }
  [[nodiscard]] const std::vector<std::string>& words(std::size_t i) const { return words_.at(i); }

  bool operator==(const TermSet& other) const { return terms_ == other.terms_; }

 private:
  std::vector<std::string> terms_;
  std::vector<std::vector<std::string>> words_;
};

struct CorpusStats {
  std::size_t doc_count = 0;
  std::vector<std::size_t> doc_freq;
  std::vector<double> idf;

  bool operator==(const CorpusStats&) const = default;
};

/// Non-overlapping occurrences of the (possibly multi-word) term in tokens.
std::size_t term_count(const std::vector<std::string>& term_words, const std::vector<std::string>& tokens);
std::size_t term_count(std::string_view term, const std::vector<std::string>& tokens);

/// idf(t) = ln(doc_count / df(t)), or 0 when df(t) = 0.
CorpusStats stats_from_doc_freq(std::size_t doc_count, std::vector<std::size_t> doc_freq);

/// values[i] = count(t_i, d) / |d| * idf(t_i). An empty document yields zeros.
std::vector<double> compute_tie(const std::vector<std::string>& tokens, const CorpusStats& stats,
                                const TermSet& terms);
std::vector<double> compute_tie(std::string_view text, const CorpusStats& stats, const TermSet& terms);

/// tie / ||tie||. Throws ZeroEmbedding for the zero vector.
std::vector<double> spherical_project(std::span<const double> tie);

bool is_zero(std::span<const double> v) noexcept;

}  // namespace chatcad
