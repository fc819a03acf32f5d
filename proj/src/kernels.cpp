#include "chatcad/kernels.hpp"

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chatcad::kernels {

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::vector<std::size_t> doc_freq(std::span<const TokenizedDoc> docs, const TermSet& terms) {
  const auto dims = static_cast<std::int64_t>(terms.size());
  const auto n = static_cast<std::int64_t>(docs.size());
  std::vector<std::size_t> df(terms.size(), 0);

#pragma omp parallel
  {
    std::vector<std::size_t> local(terms.size(), 0);
#pragma omp for schedule(static)
    for (std::int64_t d = 0; d < n; ++d) {
      for (std::int64_t t = 0; t < dims; ++t) {
        if (term_count(terms.words(static_cast<std::size_t>(t)), docs[static_cast<std::size_t>(d)]) > 0) {
          ++local[static_cast<std::size_t>(t)];
        }
      }
    }
#pragma omp critical
    for (std::size_t t = 0; t < df.size(); ++t) df[t] += local[t];
  }
  return df;
}

std::vector<double> tie_matrix(std::span<const TokenizedDoc> docs, const CorpusStats& stats, const TermSet& terms) {
  const std::size_t dims = terms.size();
  const auto n = static_cast<std::int64_t>(docs.size());
  std::vector<double> out(docs.size() * dims, 0.0);

#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t d = 0; d < n; ++d) {
    const auto row = compute_tie(docs[static_cast<std::size_t>(d)], stats, terms);
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(d) * dims));
  }
  return out;
}

}  // namespace chatcad::kernels
