#include "chatcad/tfidf.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "chatcad/error.hpp"
#include "chatcad/text.hpp"
#include "chatcad/vec.hpp"

namespace chatcad {

TermSet::TermSet(const std::vector<std::string>& terms) {
  if (terms.empty()) throw Error(ErrorCode::InvalidTermSet, "term set is empty");
  std::set<std::string> seen;
  for (const auto& raw : terms) {
    auto words = tokenize(raw);
    if (words.empty()) throw Error(ErrorCode::InvalidTermSet, "term '" + raw + "' has no words");
    auto normalized = join(words, " ");
    if (!seen.insert(normalized).second) {
      throw Error(ErrorCode::InvalidTermSet, "duplicate term '" + normalized + "'");
    }
    terms_.push_back(std::move(normalized));
    words_.push_back(std::move(words));
  }
}

TermSet TermSet::default_thoracic() {
  return TermSet({"no finding", "enlarged cardiomediastinum", "cardiomegaly", "lung lesion", "lung opacity",
                  "edema", "consolidation", "pneumonia", "atelectasis", "pneumothorax", "pleural effusion",
                  "pleural other", "fracture", "support devices", "effusion", "opacity", "nodule"});
}

TermSet TermSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open term file " + path.string());
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    terms.push_back(line.substr(first));
  }
  return TermSet(terms);
}

std::size_t term_count(const std::vector<std::string>& term_words, const std::vector<std::string>& tokens) {
  if (term_words.size() == 1) {
    std::size_t n = 0;
    for (const auto& t : tokens) n += (t == term_words.front());
    return n;
  }
  return count_phrase(term_words, tokens);
}

std::size_t term_count(std::string_view term, const std::vector<std::string>& tokens) {
  return term_count(tokenize(term), tokens);
}

CorpusStats stats_from_doc_freq(std::size_t doc_count, std::vector<std::size_t> doc_freq) {
  CorpusStats s;
  s.doc_count = doc_count;
  s.idf.reserve(doc_freq.size());
  for (auto df : doc_freq) {
    s.idf.push_back(df > 0 ? std::log(static_cast<double>(doc_count) / static_cast<double>(df)) : 0.0);
  }
  s.doc_freq = std::move(doc_freq);
  return s;
}

std::vector<double> compute_tie(const std::vector<std::string>& tokens, const CorpusStats& stats,
                                const TermSet& terms) {
  std::vector<double> tie(terms.size(), 0.0);
  if (tokens.empty()) return tie;
  const auto len = static_cast<double>(tokens.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (stats.idf[i] == 0.0) continue;
    const auto c = term_count(terms.words(i), tokens);
    if (c) tie[i] = (static_cast<double>(c) / len) * stats.idf[i];
  }
  return tie;
}

std::vector<double> compute_tie(std::string_view text, const CorpusStats& stats, const TermSet& terms) {
  return compute_tie(tokenize(text), stats, terms);
}

bool is_zero(std::span<const double> v) noexcept {
  for (double x : v) {
    if (x != 0.0) return false;
  }
  return true;
}

std::vector<double> spherical_project(std::span<const double> tie) {
  const double n = norm2(tie);
  if (!(n > 0.0)) throw Error(ErrorCode::ZeroEmbedding, "cannot project a zero TF-IDF embedding");
  std::vector<double> out(tie.begin(), tie.end());
  for (auto& x : out) x /= n;
  return out;
}

}  // namespace chatcad
