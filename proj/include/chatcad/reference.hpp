#pragma once

// Serial reference versions of the parallel kernels and of KD-tree search.
// Linked by the tests and the benchmark only.

#include <cstddef>
#include <span>
#include <vector>

#include "chatcad/kernels.hpp"
#include "chatcad/kdtree.hpp"

namespace chatcad::reference {

std::vector<std::size_t> doc_freq_serial(std::span<const kernels::TokenizedDoc> docs, const TermSet& terms);

std::vector<double> tie_matrix_serial(std::span<const kernels::TokenizedDoc> docs, const CorpusStats& stats,
                                      const TermSet& terms);

/// Exhaustive L2 scan over row-major `points` (ids are row indices) with the
/// same tie rule as KdTree::nearest.
std::vector<Neighbor> linear_scan(std::span<const double> points, std::size_t dims,
                                  std::span<const double> query, std::size_t k);

}  // namespace chatcad::reference
