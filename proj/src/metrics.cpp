#include "chatcad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "chatcad/error.hpp"
#include "chatcad/text.hpp"

namespace chatcad {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<Ngram, std::size_t> out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++out[Ngram(tokens.begin() + i, tokens.begin() + i + n)];
  return out;
}

void check_pairs(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::LengthMismatch, std::to_string(a) + " candidates vs " + std::to_string(b) + " references");
  if (a == 0) throw Error(ErrorCode::EmptyCorpus, "no pairs to score");
}

}  // namespace

double corpus_bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
                   std::size_t max_n) {
  check_pairs(candidates.size(), references.size());
  if (max_n == 0) throw Error(ErrorCode::InvalidArgument, "max_n must be positive");
  std::vector<std::size_t> matches(max_n, 0), totals(max_n, 0);
  std::size_t c = 0, r = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto cand = tokenize(candidates[i]);
    const auto ref = tokenize(references[i]);
    c += cand.size();
    r += ref.size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto cn = ngrams(cand, n);
      const auto rn = ngrams(ref, n);
      for (const auto& [g, count] : cn) {
        const auto it = rn.find(g);
        if (it != rn.end()) matches[n - 1] += std::min(count, it->second);
        totals[n - 1] += count;
      }
    }
  }
  if (c == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    const double num = matches[n] == 0 ? kBleuEpsilon : static_cast<double>(matches[n]);
    log_sum += std::log(num / static_cast<double>(std::max<std::size_t>(1, totals[n])));
  }
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(max_n));
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::string_view candidate, std::string_view reference) {
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  if (c.empty() || r.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(c, r));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(c.size());
  const double rec = lcs / static_cast<double>(r.size());
  const double b2 = kRougeBeta * kRougeBeta;
  return 100.0 * (1.0 + b2) * p * rec / (rec + b2 * p);
}

double corpus_rouge_l(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
  check_pairs(candidates.size(), references.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) sum += rouge_l(candidates[i], references[i]);
  return sum / static_cast<double>(candidates.size());
}

namespace {

const std::vector<std::vector<std::string>>& negation_cues() {
  static const std::vector<std::vector<std::string>> cues{
      {"no"}, {"not"}, {"without"}, {"no", "sign", "of"}, {"free", "of"}};
  return cues;
}

bool is_terminator(const std::string& t) {
  static const std::vector<std::string> words{"but", "however", "although", "though", "except", "yet", "apart"};
  return std::find(words.begin(), words.end(), t) != words.end();
}

bool negated(const std::vector<std::string>& tokens, std::size_t start) {
  std::size_t lo = start >= kNegationWindow ? start - kNegationWindow : 0;
  for (std::size_t i = start; i > lo; --i) {
    if (is_terminator(tokens[i - 1])) {
      lo = i;
      break;
    }
  }
  for (const auto& cue : negation_cues()) {
    if (cue.size() > start - lo) continue;
    for (std::size_t i = lo; i + cue.size() <= start; ++i) {
      if (std::equal(cue.begin(), cue.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    }
  }
  return false;
}

}  // namespace

LabelVector extract_labels(std::string_view report, const TermSet& terms) {
  LabelVector bits(terms.size(), false);
  for (const auto sentence : split_sentences(report)) {
    const auto tokens = tokenize(sentence);
    for (std::size_t t = 0; t < terms.size(); ++t) {
      if (bits[t]) continue;
      const auto& w = terms.words(t);
      for (std::size_t i = 0; i + w.size() <= tokens.size(); ++i) {
        if (std::equal(w.begin(), w.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i)) && !negated(tokens, i)) {
          bits[t] = true;
          break;
        }
      }
    }
  }
  return bits;
}

CeScores ce_scores(const std::vector<LabelVector>& predicted, const std::vector<LabelVector>& truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "predicted and truth differ in sample count");
  }
  CeScores s;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].size() != truth[i].size()) throw Error(ErrorCode::LengthMismatch, "label width differs");
    for (std::size_t j = 0; j < truth[i].size(); ++j) {
      if (predicted[i][j] && truth[i][j]) ++s.tp;
      else if (predicted[i][j]) ++s.fp;
      else if (truth[i][j]) ++s.fn;
    }
  }
  s.precision = s.tp + s.fp ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp) : 0.0;
  s.recall = s.tp + s.fn ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn) : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

}  // namespace chatcad
