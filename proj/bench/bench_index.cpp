#include <benchmark/benchmark.h>

#include <cmath>
#include <map>
#include <random>

#include "chatcad/kdtree.hpp"
#include "chatcad/kernels.hpp"
#include "chatcad/reference.hpp"

namespace {

using namespace chatcad;

constexpr std::size_t kDims = 17;

// Uniform points on the unit sphere (non-negative orthant, like TIEs).
std::vector<double> sphere_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> pts(n * kDims);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (std::size_t d = 0; d < kDims; ++d) {
      const double v = std::abs(g(rng));
      pts[i * kDims + d] = v;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t d = 0; d < kDims; ++d) pts[i * kDims + d] /= norm;
  }
  return pts;
}

const KdTree& tree_for(std::size_t n) {
  static std::map<std::size_t, KdTree> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, KdTree(sphere_points(n, n), kDims)).first;
  return it->second;
}

void BM_KdTreeNearest(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto& tree = tree_for(n);
  const auto queries = sphere_points(256, 7);
  std::size_t q = 0, visited = 0, calls = 0;
  for (auto _ : state) {
    SearchStats stats;
    benchmark::DoNotOptimize(tree.nearest(std::span<const double>(queries).subspan((q++ % 256) * kDims, kDims), 3, &stats));
    visited += stats.nodes_visited;
    ++calls;
  }
  state.counters["nodes_visited"] = static_cast<double>(visited) / static_cast<double>(calls);
  state.counters["visit_fraction"] = static_cast<double>(visited) / static_cast<double>(calls * n);
}
BENCHMARK(BM_KdTreeNearest)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_LinearScan(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto pts = sphere_points(n, n);
  const auto queries = sphere_points(256, 7);
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        reference::linear_scan(pts, kDims, std::span<const double>(queries).subspan((q++ % 256) * kDims, kDims), 3));
  }
  state.counters["nodes_visited"] = static_cast<double>(n);
}
BENCHMARK(BM_LinearScan)->Arg(1000)->Arg(10000)->Arg(100000);

std::vector<kernels::TokenizedDoc> synthetic_docs(std::size_t n, const TermSet& terms) {
  std::mt19937_64 rng(11);
  std::vector<std::string> vocab = {"the", "no", "is", "there", "mild", "left", "right", "lung", "heart"};
  for (const auto& t : terms.terms()) vocab.push_back(t);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::vector<kernels::TokenizedDoc> docs(n);
  for (auto& d : docs) {
    for (int w = 0; w < 60; ++w) d.push_back(vocab[pick(rng)]);
  }
  return docs;
}

void BM_TieMatrixParallel(benchmark::State& state) {
  const auto terms = TermSet::default_thoracic();
  const auto docs = synthetic_docs(static_cast<std::size_t>(state.range(0)), terms);
  const auto stats = stats_from_doc_freq(docs.size(), kernels::doc_freq(docs, terms));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::tie_matrix(docs, stats, terms));
  state.counters["threads"] = kernels::max_threads();
}
BENCHMARK(BM_TieMatrixParallel)->Arg(10000);

void BM_TieMatrixSerial(benchmark::State& state) {
  const auto terms = TermSet::default_thoracic();
  const auto docs = synthetic_docs(static_cast<std::size_t>(state.range(0)), terms);
  const auto stats = stats_from_doc_freq(docs.size(), reference::doc_freq_serial(docs, terms));
  for (auto _ : state) benchmark::DoNotOptimize(reference::tie_matrix_serial(docs, stats, terms));
}
BENCHMARK(BM_TieMatrixSerial)->Arg(10000);

void BM_DocFreqParallel(benchmark::State& state) {
  const auto terms = TermSet::default_thoracic();
  const auto docs = synthetic_docs(static_cast<std::size_t>(state.range(0)), terms);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::doc_freq(docs, terms));
}
BENCHMARK(BM_DocFreqParallel)->Arg(10000);

void BM_DocFreqSerial(benchmark::State& state) {
  const auto terms = TermSet::default_thoracic();
  const auto docs = synthetic_docs(static_cast<std::size_t>(state.range(0)), terms);
  for (auto _ : state) benchmark::DoNotOptimize(reference::doc_freq_serial(docs, terms));
}
BENCHMARK(BM_DocFreqSerial)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
