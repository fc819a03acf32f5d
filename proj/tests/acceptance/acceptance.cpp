// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero
// if any criterion fails.

#include <httplib.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "chatcad/domain.hpp"
#include "chatcad/error.hpp"
#include "chatcad/metrics.hpp"
#include "chatcad/pipeline.hpp"
#include "chatcad/prob2text.hpp"
#include "chatcad/report_index.hpp"
#include "chatcad/retrieval.hpp"
#include "chatcad/text.hpp"
#include "chatcad/vec.hpp"
#include "support/world.hpp"

namespace {

using namespace chatcad;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Tolerances pinned by the criteria.
constexpr double kKdRuntimeLimitS = 60.0;
constexpr double kProjectionTol = 1e-9;
constexpr double kProjectionRuntimeLimitS = 1.0;
constexpr double kTfidfTol = 1e-12;
constexpr double kIdentityTol = 1e-9;
constexpr double kDisjointMax = 1e-3;
constexpr double kOracleTol = 1e-6;
constexpr double kCosineTieTol = 1e-12;

struct Result {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void fail(const std::string& why) {
    if (pass_) detail_ = why;
    pass_ = false;
  }
  void expect(bool cond, const std::string& why) {
    if (!cond) fail(why);
  }
  [[nodiscard]] Result result(std::string ok_detail) const { return {pass_, pass_ ? std::move(ok_detail) : detail_}; }

 private:
  bool pass_ = true;
  std::string detail_;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::fixed << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// KD-tree oracle equivalence

const std::vector<std::string> kKdTerms{"cardiomegaly", "edema",       "consolidation", "pneumonia", "atelectasis",
                                        "pneumothorax", "effusion",    "fracture",      "opacity",   "nodule",
                                        "lesion",       "emphysema",   "fibrosis",      "hernia",    "mass",
                                        "infiltrate",   "thickening"};
const std::vector<std::string> kFiller{"the", "no", "mild", "left", "right", "lung", "heart", "seen"};

std::string random_text(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(1, 25);
  std::uniform_int_distribution<std::size_t> term(0, kKdTerms.size() - 1), filler(0, kFiller.size() - 1);
  std::bernoulli_distribution is_term(0.35);
  std::string s;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    if (!s.empty()) s += ' ';
    s += is_term(rng) ? kKdTerms[term(rng)] : kFiller[filler(rng)];
  }
  return s;
}

std::vector<std::string> words_of(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> w;
  for (std::string t; is >> t;) w.push_back(t);
  return w;
}

// Independent TF-IDF: whitespace tokens, tf = count/len, idf = ln(N/df).
struct OracleIndex {
  std::vector<long double> idf;
  std::vector<std::vector<long double>> ties;

  explicit OracleIndex(const std::vector<std::string>& docs) {
    std::vector<std::size_t> df(kKdTerms.size(), 0);
    std::vector<std::vector<std::string>> toks;
    for (const auto& d : docs) {
      toks.push_back(words_of(d));
      const std::set<std::string> uniq(toks.back().begin(), toks.back().end());
      for (std::size_t t = 0; t < kKdTerms.size(); ++t) df[t] += uniq.count(kKdTerms[t]);
    }
    for (auto f : df) idf.push_back(f ? std::log(static_cast<long double>(docs.size()) / f) : 0.0L);
    for (const auto& t : toks) ties.push_back(tie(t));
  }

  [[nodiscard]] std::vector<long double> tie(const std::vector<std::string>& toks) const {
    std::vector<long double> v(kKdTerms.size(), 0.0L);
    if (toks.empty()) return v;
    for (std::size_t t = 0; t < kKdTerms.size(); ++t) {
      const auto c = std::count(toks.begin(), toks.end(), kKdTerms[t]);
      v[t] = static_cast<long double>(c) / toks.size() * idf[t];
    }
    return v;
  }
};

bool all_zero(const std::vector<long double>& v) {
  return std::all_of(v.begin(), v.end(), [](long double x) { return x == 0.0L; });
}

long double cosine(const std::vector<long double>& a, const std::vector<long double>& b) {
  long double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return d / std::sqrt(na * nb);
}

// Brute-force cosine ranking; runs of cosines within the tie tolerance of the
// run's first element are ordered by ascending id.
std::vector<std::size_t> oracle_top_k(const OracleIndex& o, const std::vector<long double>& q, std::size_t k) {
  std::vector<std::pair<long double, std::size_t>> scored;
  for (std::size_t i = 0; i < o.ties.size(); ++i) {
    if (!all_zero(o.ties[i])) scored.emplace_back(cosine(q, o.ties[i]), i);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (std::size_t s = 0; s < scored.size();) {
    std::size_t e = s + 1;
    while (e < scored.size() && scored[s].first - scored[e].first <= kCosineTieTol) ++e;
    std::sort(scored.begin() + static_cast<std::ptrdiff_t>(s), scored.begin() + static_cast<std::ptrdiff_t>(e),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    s = e;
  }
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) ids.push_back(scored[i].second);
  return ids;
}

Result kd_oracle() {
  Check c;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::size_t queries = 0;
  for (int corpus_no = 0; corpus_no < 200; ++corpus_no) {
    const std::size_t n = 1 + rng() % 500;
    std::vector<std::string> docs;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && rng() % 10 == 0) {
        docs.push_back(docs[rng() % i]);  // exact duplicates exercise the tie rule
      } else {
        docs.push_back(random_text(rng));
      }
    }
    docs[0] += " " + kKdTerms[rng() % kKdTerms.size()];
    const OracleIndex oracle(docs);
    const auto index = ReportIndex::build(docs, TermSet(kKdTerms));
    for (int qn = 0; qn < 5; ++qn) {
      const auto qtext = qn == 0 ? docs[rng() % n] : random_text(rng);
      const auto qtie = oracle.tie(words_of(qtext));
      for (std::size_t k : {1u, 3u, 5u}) {
        if (all_zero(qtie)) {
          try {
            (void)index.query_top_k(qtext, k);
            c.fail("zero-embedding query did not throw");
          } catch (const Error& e) {
            c.expect(e.code() == ErrorCode::ZeroEmbedding, "wrong error for zero query");
          }
          continue;
        }
        ++queries;
        std::vector<std::size_t> got;
        for (const auto& h : index.query_top_k(qtext, k)) got.push_back(h.record->id);
        if (got != oracle_top_k(oracle, qtie, k)) {
          c.fail("mismatch in corpus " + std::to_string(corpus_no) + " k=" + std::to_string(k));
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs <= kKdRuntimeLimitS, "runtime " + fmt(secs) + " s over limit");
  return c.result("200 corpora, " + std::to_string(queries) + " queries, " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------

Result projection_identity() {
  Check c;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t dims = 2 + i % 30;
    std::vector<double> a(dims), b(dims);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng);
    const auto q = spherical_project(a);
    const auto v = spherical_project(b);
    long double dot = 0;
    for (std::size_t d = 0; d < dims; ++d) dot += static_cast<long double>(q[d]) * v[d];
    const long double theta = std::acos(std::clamp(dot, -1.0L, 1.0L));
    const double err = std::abs(static_cast<double>(l2(q, v) - 2.0L * std::sin(theta / 2.0L)));
    worst = std::max(worst, err);
  }
  const double secs = seconds_since(t0);
  c.expect(worst <= kProjectionTol, "max error " + std::to_string(worst));
  c.expect(secs <= kProjectionRuntimeLimitS, "runtime " + fmt(secs) + " s over limit");
  std::ostringstream os;
  os << "1000 pairs, max error " << worst << ", " << fmt(secs) << " s";
  return c.result(os.str());
}

// ---------------------------------------------------------------------------

Result tfidf_hand_example() {
  Check c;
  // Values from tests/oracle/tfidf_oracle.py.
  const auto index =
      ReportIndex::build({"effusion effusion present", "no effusion", "cardiomegaly noted"}, TermSet({"effusion", "cardiomegaly"}));
  const std::vector<std::vector<double>> expected{
      {0.27031007207210955, 0.0}, {0.20273255405408219, 0.0}, {0.0, 0.54930614433405489}};
  c.expect(index.size() == 3, "record count");
  for (std::size_t i = 0; i < 3 && i < index.size(); ++i) {
    for (std::size_t t = 0; t < 2; ++t) {
      c.expect(std::abs(index.records()[i].tie[t] - expected[i][t]) <= kTfidfTol,
               "doc " + std::to_string(i) + " term " + std::to_string(t));
    }
  }
  c.expect(std::abs(index.stats().idf[0] - 0.40546510810816438) <= kTfidfTol, "idf(effusion)");
  c.expect(std::abs(index.stats().idf[1] - 1.0986122886681098) <= kTfidfTol, "idf(cardiomegaly)");
  return c.result("3 documents x 2 terms within 1e-12");
}

// ---------------------------------------------------------------------------

Result prob2text_table() {
  Check c;
  const std::vector<double> probs{0.0, std::nextafter(0.2, 0.0), 0.2, std::nextafter(0.5, 0.0),
                                  0.5, std::nextafter(0.9, 0.0), 0.9, 1.0};
  const std::vector<std::string> p1{"d score: 0.000", "d score: 0.200", "d score: 0.200", "d score: 0.500",
                                    "d score: 0.500", "d score: 0.900", "d score: 0.900", "d score: 1.000"};
  const std::vector<std::string> p2{"No Finding",           "No Finding",           "No Finding",
                                    "No Finding",           "The prediction is d", "The prediction is d",
                                    "The prediction is d", "The prediction is d"};
  const std::vector<std::string> p3{"No sign of d",
                                    "No sign of d",
                                    "Small possibility of d",
                                    "Small possibility of d",
                                    "Patient is likely to have d",
                                    "Patient is likely to have d",
                                    "Definitely have d",
                                    "Definitely have d"};
  const std::vector<std::pair<PromptStyle, const std::vector<std::string>*>> table{
      {PromptStyle::P1Direct, &p1}, {PromptStyle::P2Simplistic, &p2}, {PromptStyle::P3Illustrative, &p3}};
  for (const auto& [style, want] : table) {
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const auto got = describe_finding({"d", probs[i]}, style);
      c.expect(got == (*want)[i], std::string(to_string(style)) + " p=" + std::to_string(probs[i]) + ": '" + got + "'");
    }
  }
  return c.result("8 probabilities x 3 styles byte-exact");
}

// ---------------------------------------------------------------------------

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t dims) {
  std::normal_distribution<double> g;
  std::vector<double> v(dims);
  for (auto& x : v) x = g(rng);
  return v;
}

std::size_t brute_argmax(const std::vector<double>& q, const std::vector<std::vector<double>>& ds) {
  std::size_t best = 0;
  long double best_cos = -2;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    long double d = 0, nq = 0, nd = 0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      d += static_cast<long double>(q[j]) * ds[i][j];
      nq += static_cast<long double>(q[j]) * q[j];
      nd += static_cast<long double>(ds[i][j]) * ds[i][j];
    }
    const long double cs = d / std::sqrt(nq * nd);
    if (cs > best_cos) {
      best_cos = cs;
      best = i;
    }
  }
  return best;
}

Result domain_dispatch() {
  Check c;
  std::mt19937_64 rng(4242);
  constexpr std::size_t kDims = 32;
  std::size_t queries = 0;
  for (int r = 0; r < 100; ++r) {
    DomainRegistry reg(kDims);
    std::vector<std::vector<double>> ds;
    for (int d = 0; d < 9; ++d) {
      ds.push_back(gaussian(rng, kDims));
      reg.add_domain({"d" + std::to_string(d), "domain " + std::to_string(d), ds.back()});
    }
    for (int q = 0; q < 50; ++q, ++queries) {
      const auto img = gaussian(rng, kDims);
      const auto want = "d" + std::to_string(brute_argmax(img, ds));
      c.expect(reg.identify({img, "q"}) == want, "registry " + std::to_string(r) + " query " + std::to_string(q));
    }
  }
  // Well-separated clusters around orthogonal centres.
  DomainRegistry reg(kDims);
  for (int d = 0; d < 9; ++d) {
    std::vector<double> centre(kDims, 0.0);
    centre[static_cast<std::size_t>(d) * 3] = 1.0;
    reg.add_domain({"c" + std::to_string(d), "cluster", centre});
  }
  std::normal_distribution<double> noise(0.0, 0.05);
  std::size_t correct = 0, total = 0;
  for (int d = 0; d < 9; ++d) {
    for (int i = 0; i < 100; ++i, ++total) {
      std::vector<double> img(kDims);
      for (auto& x : img) x = noise(rng);
      img[static_cast<std::size_t>(d) * 3] += 1.0;
      correct += reg.identify({img, "x"}) == "c" + std::to_string(d);
    }
  }
  c.expect(correct == total, "clusters " + std::to_string(correct) + "/" + std::to_string(total));
  return c.result("100 registries x 50 queries match argmax; clusters " + std::to_string(correct) + "/" +
                  std::to_string(total));
}

// ---------------------------------------------------------------------------
// DFS trace equivalence against hand-simulated traces.

struct ExpectedStep {
  NodePath path;
  std::string action;
  std::string note;
};

struct Program {
  std::string name;
  std::vector<std::string> script;
  std::size_t budget;
  std::vector<ExpectedStep> steps;
  RetrievalOutcome outcome;
  std::optional<NodePath> found;
  std::vector<NodePath> visited;
};

Result dfs_equivalence() {
  Check c;
  const auto tree = ingest_directory(testing::fixture("kb"));
  const auto templates = PromptTemplates::defaults();
  const std::string query = "pleural effusion severity";
  const NodePath T{}, PE{"Pleural Effusion"}, PERIO{"Periodontitis"}, KNEE{"Knee Osteoarthritis"};
  const NodePath pe_ss{"Pleural Effusion", "Symptoms and Signs"};
  const NodePath diag{"Pleural Effusion", "Diagnosis"};
  const NodePath img{"Pleural Effusion", "Diagnosis", "Imaging"};
  const NodePath tho{"Pleural Effusion", "Diagnosis", "Thoracentesis"};
  const NodePath perio_ss{"Periodontitis", "Symptoms and Signs"};

  const std::vector<Program> programs{
      {"direct descent",
       {"1", "1", "FOUND"},
       30,
       {{T, "select:0", ""}, {PE, "select:0", ""}, {pe_ss, "found", ""}},
       RetrievalOutcome::Found,
       pe_ss,
       {PE, pe_ss}},
      {"backtrack within a section",
       {"1", "2", "1", "BACK", "2", "FOUND"},
       30,
       {{T, "select:0", ""},
        {PE, "select:1", ""},
        {diag, "select:0", ""},
        {img, "back", ""},
        {diag, "select:1", ""},
        {tho, "found", ""}},
       RetrievalOutcome::Found,
       tho,
       {PE, diag, img, tho}},
      {"always back",
       {},
       30,
       {{T, "back", "next_topic"},
        {PE, "back", ""},
        {T, "back", "next_topic"},
        {PERIO, "back", ""},
        {T, "back", "next_topic"},
        {KNEE, "back", ""}},
       RetrievalOutcome::Exhausted,
       std::nullopt,
       {PE, PERIO, KNEE}},
      {"budget exhausted",
       {"1", "2", "1", "BACK", "2", "FOUND"},
       5,
       {{T, "select:0", ""}, {PE, "select:1", ""}, {diag, "select:0", ""}, {img, "back", ""}, {diag, "select:1", ""}},
       RetrievalOutcome::BudgetStop,
       std::nullopt,
       {PE, diag, img, tho}},
      {"revisit, parse failure, internal found",
       {"2", "1", "BACK", "1", "nonsense", "nonsense", "nonsense", "FOUND"},
       30,
       {{T, "select:1", ""},
        {PERIO, "select:0", ""},
        {perio_ss, "back", ""},
        {PERIO, "select:0", "already_visited"},
        {T, "back", "parse_failure"},
        {PE, "found", ""}},
       RetrievalOutcome::Found,
       PE,
       {PERIO, perio_ss, PE}},
  };

  for (const auto& p : programs) {
    ScriptedNavigator nav(p.script);
    RetrievalOptions opt;
    opt.budget = p.budget;
    const auto r = retrieve_knowledge(query, tree, nav, templates, opt);
    c.expect(r.steps.size() == p.steps.size(), p.name + ": step count " + std::to_string(r.steps.size()));
    for (std::size_t i = 0; i < std::min(r.steps.size(), p.steps.size()); ++i) {
      const auto& s = r.steps[i];
      c.expect(s.path == p.steps[i].path && to_string(s.action) == p.steps[i].action && s.note == p.steps[i].note,
               p.name + ": step " + std::to_string(i) + " is " + format_path(s.path) + " / " + to_string(s.action) +
                   " / " + s.note);
    }
    c.expect(r.outcome == p.outcome, p.name + ": outcome " + std::string(to_string(r.outcome)));
    c.expect(r.found_path == p.found, p.name + ": found path");
    c.expect(r.visited == p.visited, p.name + ": visited");
    c.expect(r.knowledge.has_value() == (p.outcome != RetrievalOutcome::Exhausted), p.name + ": knowledge presence");
  }

  // Termination for a random-action navigator.
  const std::size_t bound = 2 * tree.node_count() + 1;
  std::size_t max_steps = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    RandomNavigator nav(seed);
    RetrievalOptions opt;
    opt.budget = 100000;
    opt.max_depth = 1 + seed % 5;
    const auto r = retrieve_knowledge(query, tree, nav, templates, opt);
    max_steps = std::max(max_steps, r.steps.size());
    c.expect(r.outcome != RetrievalOutcome::BudgetStop, "random seed " + std::to_string(seed) + " hit the budget");
    c.expect(r.steps.size() <= bound, "random seed " + std::to_string(seed) + " took " + std::to_string(r.steps.size()));
  }
  return c.result("5 programs match; 1000 random runs terminate (max " + std::to_string(max_steps) + " steps, bound " +
                  std::to_string(bound) + ")");
}

// ---------------------------------------------------------------------------

Result end_to_end_determinism() {
  Check c;
  const testing::World world;
  const std::vector<std::string> images{"img1", "img2", "tooth1", "knee1"};
  auto mock = [] {
    return RuleMock({{std::regex("Example report 1:\\n([^\\n]*)"),
                      RuleMock::substitute(std::regex("Example report 1:\\n([^\\n]*)"), "Refined: {1}")},
                     {std::regex("network\\(s\\):\\n([\\s\\S]*?)\\nWrite a report"),
                      RuleMock::substitute(std::regex("network\\(s\\):\\n([\\s\\S]*?)\\nWrite a report"),
                                           "The heart is enlarged consistent with cardiomegaly. {1}")}});
  };
  for (const auto& image : images) {
    for (std::size_t k : {0u, 1u, 3u, 5u}) {
      auto a = mock();
      auto b = mock();
      const auto ta = generate_report(image, k, PromptStyle::P3Illustrative, world.context(a));
      const auto tb = generate_report(image, k, PromptStyle::P3Illustrative, world.context(b));
      const auto tag = image + " k=" + std::to_string(k);
      c.expect(to_json(ta).dump() == to_json(tb).dump(), tag + ": traces differ");
      if (k == 0) {
        c.expect(ta.enhanced_report == ta.preliminary_report, tag + ": enhanced != preliminary");
        c.expect(a.calls() == 1 && ta.llm_calls.size() == 1, tag + ": expected 1 LLM call");
      } else {
        c.expect(!ta.degraded && ta.k_used == k, tag + ": k_used " + std::to_string(ta.k_used));
        c.expect(a.calls() == 2 && ta.llm_calls.size() == 2, tag + ": expected 2 LLM calls");
      }
    }
  }
  return c.result("4 images x k in {0,1,3,5}: byte-identical traces, call budget 1/2 holds");
}

// ---------------------------------------------------------------------------

Result metrics_sanity() {
  Check c;
  const std::vector<std::string> same{"mild cardiomegaly with small bilateral effusions",
                                      "no pneumothorax is seen on this study"};
  c.expect(std::abs(corpus_bleu(same, same) - 100.0) <= kIdentityTol, "BLEU identity");
  c.expect(std::abs(corpus_rouge_l(same, same) - 100.0) <= kIdentityTol, "ROUGE-L identity");
  const std::vector<std::string> other{"alpha beta gamma delta epsilon", "one two three four five six"};
  c.expect(corpus_bleu(same, other) <= kDisjointMax, "BLEU disjoint");
  c.expect(corpus_rouge_l(same, other) <= kDisjointMax, "ROUGE-L disjoint");
  // Values from tests/oracle/metrics_oracle.py.
  c.expect(std::abs(corpus_bleu({"the cat sat"}, {"the cat sat down"}) - 0.4029351667284424) <= kOracleTol, "BLEU 1");
  c.expect(std::abs(corpus_bleu({"a b c d"}, {"a c b d"}) - 1.1362193664675e-05) <= kOracleTol, "BLEU 2");
  c.expect(std::abs(corpus_bleu({"the cat is on the mat", "small left pleural effusion is seen"},
                                {"the cat sat on the mat", "there is a small pleural effusion"}) -
                    0.15811388300841908) <= kOracleTol,
           "BLEU 3");
  c.expect(std::abs(corpus_bleu({"Heart size is normal. No pleural effusion or pneumothorax.",
                                 "Mild cardiomegaly with small bilateral effusions."},
                                {"The heart size is normal. There is no pleural effusion or pneumothorax.",
                                 "Moderate cardiomegaly. Small bilateral pleural effusions are present."}) -
                    38.20312335695121) <= kOracleTol,
           "BLEU 4");
  c.expect(std::abs(rouge_l("a b c d", "a c b d") - 75.0) <= kOracleTol, "ROUGE-L 1");
  c.expect(std::abs(rouge_l("the cat sat", "the cat sat down") - 83.56164383561644) <= kOracleTol, "ROUGE-L 2");
  c.expect(std::abs(rouge_l("mild cardiomegaly with small bilateral effusions",
                            "moderate cardiomegaly small bilateral pleural effusions are present") -
                    55.70776255707762) <= kOracleTol,
           "ROUGE-L 3");
  return c.result("identity 100, disjoint <= 1e-3, 7 oracle cases within 1e-6");
}

// ---------------------------------------------------------------------------
// k-ablation: leave-one-out over the fixture corpus. Each held-out report is
// the ground truth; the CAD output lists the terms it mentions.

Result k_ablation() {
  Check c;
  const auto corpus = load_corpus_ndjson(testing::fixture("corpus.ndjson"));
  const auto terms = TermSet::default_thoracic();
  const auto templates = PromptTemplates::defaults();
  const std::regex refine("Example report 1:\\n([^\\n]*)");
  const std::regex prelim("network\\(s\\):\\n([\\s\\S]*?)\\nWrite a report");

  std::vector<std::string> truth, k0, k1;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    json findings = json::array();
    const auto toks = tokenize(corpus[i].text);
    for (std::size_t t = 0; t < terms.size(); ++t) {
      if (term_count(terms.words(t), toks) > 0) findings.push_back({{"disease", terms.terms()[t]}, {"prob", 0.95}});
    }
    if (findings.empty()) continue;
    const std::string case_id = "case-" + std::to_string(i);
    json records{{case_id, {{"findings", findings}, {"raw_report", nullptr}}}};
    auto adapter = std::make_shared<FileCadAdapter>("chest-xray", records);
    FileEmbeddingProvider embeddings(2, {{case_id, {1.0, 0.0}}});
    DomainRegistry registry(2);
    registry.add_domain({"chest-xray", "a chest X-ray image", {1.0, 0.0}});
    registry.register_adapter("chest-xray", adapter);

    std::vector<CorpusDoc> rest;
    for (std::size_t j = 0; j < corpus.size(); ++j) {
      if (j != i) rest.push_back(corpus[j]);
    }
    const auto index = ReportIndex::build(rest, terms);

    std::string out[2];
    for (std::size_t k : {0u, 1u}) {
      RuleMock llm({{refine, RuleMock::substitute(refine, "{1}")}, {prelim, RuleMock::substitute(prelim, "{1}")}});
      PipelineContext ctx;
      ctx.registry = &registry;
      ctx.embeddings = &embeddings;
      ctx.index = &index;
      ctx.llm = &llm;
      ctx.templates = &templates;
      ctx.clock = [t = 0.0]() mutable { return t += 1.0; };
      out[k] = generate_report(case_id, k, PromptStyle::P3Illustrative, ctx).enhanced_report;
    }
    truth.push_back(corpus[i].text);
    k0.push_back(out[0]);
    k1.push_back(out[1]);
  }
  c.expect(!truth.empty(), "no cases");
  const double r0 = corpus_rouge_l(k0, truth);
  const double r1 = corpus_rouge_l(k1, truth);
  c.expect(r1 >= r0, "ROUGE-L k=1 " + fmt(r1) + " < k=0 " + fmt(r0));
  return c.result(std::to_string(truth.size()) + " cases, ROUGE-L k=0 " + fmt(r0) + " -> k=1 " + fmt(r1));
}

// ---------------------------------------------------------------------------
// Service durability: SIGKILL a running server and restart it on the same data.

struct ServerProcess {
  pid_t pid = -1;
  int port = -1;
};

ServerProcess spawn_server(const fs::path& config) {
  int fds[2];
  if (pipe(fds) != 0) return {};
  const pid_t pid = fork();
  if (pid == 0) {
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    execl(CHATCADP_BIN, CHATCADP_BIN, "serve", "--config", config.c_str(), "--port", "0", static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  ServerProcess p{pid, -1};
  std::string line;
  char ch = 0;
  while (read(fds[0], &ch, 1) == 1 && ch != '\n') line.push_back(ch);
  close(fds[0]);
  const auto pos = line.rfind(' ');
  if (pos != std::string::npos) p.port = std::atoi(line.c_str() + pos + 1);
  return p;
}

void kill_server(const ServerProcess& p) {
  if (p.pid <= 0) return;
  kill(p.pid, SIGKILL);
  waitpid(p.pid, nullptr, 0);
}

Result service_durability() {
  Check c;
  const fs::path dir = fs::temp_directory_path() / ("chatcad-accept-" + std::to_string(getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto f = [](const char* name) { return testing::fixture(name).string(); };
  const json cfg{
      {"data_dir", (dir / "data").string()},
      {"llm",
       {{"backend", "mock"},
        {"rules",
         {{{"pattern", "Example report 1:\\n([^\\n]*)"}, {"reply", "{1}"}},
          {{"pattern", "network\\(s\\):\\n([\\s\\S]*?)\\nWrite a report"}, {"reply", "Findings: {1}"}},
          {{"pattern", "Knowledge:\\n([\\s\\S]*?)\\n\\nQuestion:"}, {"reply", "Grounded: {1}"}}}},
        {"fallback", "Please consult a clinician."}}},
      {"embeddings", f("embeddings.json")},
      {"domains",
       {{{"id", "chest-xray"}, {"description", "a chest X-ray image"}, {"cad", f("cad_chest.json")}},
        {{"id", "dental-xray"}, {"description", "a dental X-ray image"}, {"cad", f("cad_dental.json")}},
        {{"id", "knee-mri"}, {"description", "a knee MRI image"}, {"cad", f("cad_knee.json")}}}},
      {"corpus", f("corpus.ndjson")},
      {"knowledge", {{"dir", f("kb")}}},
      {"chat", {{"navigator", "script"}, {"script", f("nav_found.json")}}},
  };
  const auto config_path = dir / "config.json";
  std::ofstream(config_path) << cfg.dump(2);

  std::vector<std::string> gets;
  std::map<std::string, std::string> bodies;
  auto srv = spawn_server(config_path);
  if (srv.port <= 0) {
    kill_server(srv);
    c.fail("server did not start");
    return c.result("");
  }
  {
    httplib::Client cli("127.0.0.1", srv.port);
    std::string sid;
    for (const char* image : {"img1", "img2", "tooth1"}) {
      auto r = cli.Post("/v1/report", json{{"image_id", image}, {"k", 2}}.dump(), "application/json");
      c.expect(r && r->status == 200, std::string("report ") + image);
      if (r) gets.push_back("/v1/trace/" + json::parse(r->body)["trace_id"].get<std::string>());
    }
    for (const char* msg : {"Is pleural effusion serious?", "How is it treated?"}) {
      json body{{"message", msg}};
      if (!sid.empty()) body["session_id"] = sid;
      auto r = cli.Post("/v1/chat", body.dump(), "application/json");
      c.expect(r && r->status == 200, std::string("chat ") + msg);
      if (!r) continue;
      const auto j = json::parse(r->body);
      sid = j["session_id"];
      gets.push_back("/v1/trace/" + j["trace_id"].get<std::string>());
    }
    gets.push_back("/v1/sessions/" + sid);
    for (const auto& path : gets) {
      auto a = cli.Get(path.c_str());
      auto b = cli.Get(path.c_str());
      c.expect(a && b && a->status == 200 && a->body == b->body, "GET not stable before restart: " + path);
      if (a) bodies[path] = a->body;
    }
  }
  kill_server(srv);

  srv = spawn_server(config_path);
  if (srv.port <= 0) {
    kill_server(srv);
    c.fail("server did not restart");
    return c.result("");
  }
  {
    httplib::Client cli("127.0.0.1", srv.port);
    for (const auto& path : gets) {
      auto a = cli.Get(path.c_str());
      c.expect(a && a->status == 200 && a->body == bodies[path], "replay differs: " + path);
    }
    // The replayed session keeps accepting turns.
    const auto sid = gets.back().substr(std::string("/v1/sessions/").size());
    auto r = cli.Post("/v1/chat", json{{"session_id", sid}, {"message", "Any follow-up?"}}.dump(), "application/json");
    c.expect(r && r->status == 200, "chat after restart");
    auto s = cli.Get(gets.back().c_str());
    c.expect(s && json::parse(s->body)["turns"].size() == 6, "session turns after restart");
    auto missing = cli.Get("/v1/trace/tr-999999");
    c.expect(missing && missing->status == 404, "missing trace");
  }
  kill_server(srv);
  fs::remove_all(dir);
  return c.result(std::to_string(gets.size()) + " resources byte-identical across SIGKILL and restart");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
      {"kd-tree oracle equivalence", kd_oracle},
      {"projection identity", projection_identity},
      {"tf-idf hand example", tfidf_hand_example},
      {"prob2text golden table", prob2text_table},
      {"domain dispatch oracle", domain_dispatch},
      {"dfs trace equivalence", dfs_equivalence},
      {"end-to-end determinism", end_to_end_determinism},
      {"metrics sanity", metrics_sanity},
      {"k-ablation shape", k_ablation},
      {"service durability", service_durability},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Result r;
    try {
      r = run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failures += !r.pass;
    std::cout << (r.pass ? "PASS " : "FAIL ") << name << ": " << r.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
