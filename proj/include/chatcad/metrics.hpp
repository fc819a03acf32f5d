#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "chatcad/tfidf.hpp"

namespace chatcad {

inline constexpr double kBleuEpsilon = 1e-9;
inline constexpr double kRougeBeta = 1.2;
inline constexpr std::size_t kNegationWindow = 4;

/// Corpus BLEU x100: clipped n-gram counts pooled over all pairs, geometric
/// mean over n = 1..max_n, a zero match count replaced by epsilon, brevity
/// penalty exp(1 - r/c) when c < r. Throws LengthMismatch or EmptyCorpus.
double corpus_bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
                   std::size_t max_n = 4);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// LCS F-measure x100 with beta = 1.2; 0 when either side is empty.
double rouge_l(std::string_view candidate, std::string_view reference);

/// Mean per-pair ROUGE-L. Throws LengthMismatch or EmptyCorpus.
double corpus_rouge_l(const std::vector<std::string>& candidates, const std::vector<std::string>& references);

using LabelVector = std::vector<bool>;

/// Bit i is set when term i occurs at least once without a negation cue
/// (no, not, without, "no sign of", "free of") among the 4 preceding tokens
/// of the same sentence. A contrast word (but, however, ...) between the cue
/// and the term ends the cue's scope.
LabelVector extract_labels(std::string_view report, const TermSet& terms);

struct CeScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

/// Micro-averaged over every (sample, label) cell; 0 on a zero denominator.
CeScores ce_scores(const std::vector<LabelVector>& predicted, const std::vector<LabelVector>& truth);

}  // namespace chatcad
