#pragma once

#include <span>
#include <string>
#include <vector>

#include "chatcad/tfidf.hpp"

namespace chatcad::kernels {

using TokenizedDoc = std::vector<std::string>;

/// df(t) for every term, parallel over documents (OpenMP when available).
std::vector<std::size_t> doc_freq(std::span<const TokenizedDoc> docs, const TermSet& terms);

/// Row-major n x |terms| matrix of TIEs, one row per document, parallel over rows.
/// Each row is computed independently, so the result equals the serial loop bit for bit.
std::vector<double> tie_matrix(std::span<const TokenizedDoc> docs, const CorpusStats& stats, const TermSet& terms);

/// Number of worker threads the parallel kernels will use.
int max_threads() noexcept;

}  // namespace chatcad::kernels
