#include <algorithm>

#include "chatcad/reference.hpp"
#include "chatcad/vec.hpp"

namespace chatcad::reference {

std::vector<std::size_t> doc_freq_serial(std::span<const kernels::TokenizedDoc> docs, const TermSet& terms) {
  std::vector<std::size_t> df(terms.size(), 0);
  for (const auto& doc : docs) {
    for (std::size_t t = 0; t < terms.size(); ++t) {
      if (term_count(terms.words(t), doc) > 0) ++df[t];
    }
  }
  return df;
}

std::vector<double> tie_matrix_serial(std::span<const kernels::TokenizedDoc> docs, const CorpusStats& stats,
                                      const TermSet& terms) {
  std::vector<double> out;
  out.reserve(docs.size() * terms.size());
  for (const auto& doc : docs) {
    const auto row = compute_tie(doc, stats, terms);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

std::vector<Neighbor> linear_scan(std::span<const double> points, std::size_t dims,
                                  std::span<const double> query, std::size_t k) {
  const std::size_t n = dims ? points.size() / dims : 0;
  std::vector<Neighbor> all;
  all.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    all.push_back({static_cast<std::uint32_t>(i), l2(query, points.subspan(i * dims, dims))});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });
  normalize_ties(all);
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace chatcad::reference
