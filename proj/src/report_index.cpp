#include "chatcad/report_index.hpp"

#include <algorithm>
#include <fstream>

#include "chatcad/error.hpp"
#include "chatcad/kernels.hpp"
#include "chatcad/text.hpp"

namespace chatcad {

namespace {
constexpr const char* kFormat = "chatcadp-report-index";
constexpr int kVersion = 1;
}  // namespace

std::vector<CorpusDoc> load_corpus_ndjson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open corpus " + path.string());
  std::vector<CorpusDoc> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      docs.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

ReportIndex ReportIndex::build(const std::vector<std::string>& texts, TermSet terms) {
  std::vector<CorpusDoc> corpus;
  corpus.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) corpus.push_back({std::to_string(i), texts[i]});
  return build(corpus, std::move(terms));
}

ReportIndex ReportIndex::build(const std::vector<CorpusDoc>& corpus, TermSet terms) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot build an index from an empty corpus");
  ReportIndex index(std::move(terms));
  const std::size_t dims = index.terms_.size();

  std::vector<kernels::TokenizedDoc> tokens(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) tokens[i] = tokenize(corpus[i].text);

  index.stats_ = stats_from_doc_freq(corpus.size(), kernels::doc_freq(tokens, index.terms_));
  const auto ties = kernels::tie_matrix(tokens, index.stats_, index.terms_);

  std::vector<double> points;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::vector<double> tie(ties.begin() + static_cast<std::ptrdiff_t>(i * dims),
                            ties.begin() + static_cast<std::ptrdiff_t>((i + 1) * dims));
    if (is_zero(tie)) {
      ++index.excluded_;
      continue;
    }
    ReportRecord r;
    r.id = static_cast<std::uint32_t>(i);
    r.doc_id = corpus[i].doc_id;
    r.text = corpus[i].text;
    r.point = spherical_project(tie);
    r.tie = std::move(tie);
    points.insert(points.end(), r.point.begin(), r.point.end());
    index.records_.push_back(std::move(r));
  }
  if (index.records_.empty()) {
    throw Error(ErrorCode::AllDocumentsEmpty, "no document mentions any term of the term set");
  }
  index.tree_ = KdTree(std::move(points), dims);
  return index;
}

std::vector<double> ReportIndex::embed(const std::string& text) const { return compute_tie(text, stats_, terms_); }

const ReportRecord& ReportIndex::record(std::uint32_t id) const {
  const auto it = std::lower_bound(records_.begin(), records_.end(), id,
                                   [](const ReportRecord& r, std::uint32_t v) { return r.id < v; });
  if (it == records_.end() || it->id != id) throw Error(ErrorCode::NotFound, "no record " + std::to_string(id));
  return *it;
}

std::vector<RetrievedReport> ReportIndex::query_top_k(const std::string& query_text, std::size_t k,
                                                      SearchStats* stats) const {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  const auto tie = embed(query_text);
  const auto point = spherical_project(tie);
  // Tree slots follow records_ order, which is ascending record id, so the
  // tree's slot tie-break matches the record-id rule.
  const auto hits = tree_.nearest(point, k, stats);
  std::vector<RetrievedReport> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back({&records_[h.id], h.distance});
  return out;
}

std::vector<std::vector<RetrievedReport>> ReportIndex::query_batch(const std::vector<std::string>& queries,
                                                                   std::size_t k) const {
  std::vector<std::vector<RetrievedReport>> out(queries.size());
  const auto n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto tie = embed(queries[idx]);
    if (is_zero(tie)) continue;
    out[idx] = query_top_k(queries[idx], k);
  }
  return out;
}

nlohmann::json ReportIndex::to_json() const {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : records_) {
    records.push_back({{"id", r.id}, {"doc_id", r.doc_id}, {"text", r.text}, {"tie", r.tie}});
  }
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree_.nodes()) nodes.push_back({n.point, n.dim, n.left, n.right});
  return {{"format", kFormat},
          {"version", kVersion},
          {"terms", terms_.terms()},
          {"stats", {{"doc_count", stats_.doc_count}, {"doc_freq", stats_.doc_freq}, {"idf", stats_.idf}}},
          {"excluded", excluded_},
          {"records", records},
          {"tree", nodes}};
}

ReportIndex ReportIndex::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormat || j.at("version").get<int>() != kVersion) {
      throw Error(ErrorCode::MalformedIndex, "unsupported index format or version");
    }
    ReportIndex index(TermSet(j.at("terms").get<std::vector<std::string>>()));
    const auto& s = j.at("stats");
    index.stats_.doc_count = s.at("doc_count").get<std::size_t>();
    index.stats_.doc_freq = s.at("doc_freq").get<std::vector<std::size_t>>();
    index.stats_.idf = s.at("idf").get<std::vector<double>>();
    const std::size_t dims = index.terms_.size();
    if (index.stats_.doc_freq.size() != dims || index.stats_.idf.size() != dims) {
      throw Error(ErrorCode::MalformedIndex, "stats width does not match term set");
    }
    index.excluded_ = j.at("excluded").get<std::size_t>();
    std::vector<double> points;
    for (const auto& rj : j.at("records")) {
      ReportRecord r;
      r.id = rj.at("id").get<std::uint32_t>();
      r.doc_id = rj.at("doc_id").get<std::string>();
      r.text = rj.at("text").get<std::string>();
      r.tie = rj.at("tie").get<std::vector<double>>();
      if (r.tie.size() != dims) throw Error(ErrorCode::MalformedIndex, "record TIE width mismatch");
      if (!index.records_.empty() && r.id <= index.records_.back().id) {
        throw Error(ErrorCode::MalformedIndex, "record ids must ascend");
      }
      r.point = spherical_project(r.tie);
      points.insert(points.end(), r.point.begin(), r.point.end());
      index.records_.push_back(std::move(r));
    }
    std::vector<KdTree::Node> nodes;
    for (const auto& nj : j.at("tree")) {
      nodes.push_back({nj.at(0).get<std::uint32_t>(), nj.at(1).get<std::uint32_t>(), nj.at(2).get<std::int32_t>(),
                       nj.at(3).get<std::int32_t>()});
    }
    index.tree_ = KdTree(std::move(points), dims, std::move(nodes));
    return index;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedIndex, e.what());
  }
}

void ReportIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write index " + path.string());
  out << to_json().dump() << '\n';
}

ReportIndex ReportIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open index " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedIndex, e.what());
  }
}

}  // namespace chatcad
