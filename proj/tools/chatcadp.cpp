#include <CLI11.hpp>

#include <pthread.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include "chatcad/config.hpp"
#include "chatcad/error.hpp"
#include "chatcad/metrics.hpp"
#include "chatcad/service.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace chatcad;

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitConfig = 2;

std::shared_ptr<Runtime> load_runtime(const fs::path& config_path) {
  auto config = ServiceConfig::load(config_path);
  config.validate();
  return std::make_shared<Runtime>(config);
}

// NDJSON rows {"id": str, "text": str}.
std::vector<std::pair<std::string, std::string>> read_texts(const fs::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& d : load_corpus_ndjson(path)) out.emplace_back(d.doc_id, d.text);
  return out;
}

// Candidates and references paired by id; every id must appear in both.
std::pair<std::vector<std::string>, std::vector<std::string>> paired(const fs::path& cand, const fs::path& ref) {
  const auto cands = read_texts(cand);
  std::map<std::string, std::string> refs;
  for (auto& [id, text] : read_texts(ref)) refs.emplace(id, text);
  if (cands.size() != refs.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(cands.size()) + " candidates vs " +
                                               std::to_string(refs.size()) + " references");
  }
  std::vector<std::string> c, r;
  for (const auto& [id, text] : cands) {
    const auto it = refs.find(id);
    if (it == refs.end()) throw Error(ErrorCode::LengthMismatch, "no reference for id " + id);
    c.push_back(text);
    r.push_back(it->second);
  }
  return {c, r};
}

TermSet load_terms(const std::string& path) { return path.empty() ? TermSet::default_thoracic() : TermSet::load(path); }

std::unique_ptr<ReportIndex> open_index(const std::string& index, const std::string& corpus, const std::string& terms,
                                        const std::string& config) {
  if (!index.empty()) return std::make_unique<ReportIndex>(ReportIndex::load(index));
  if (!corpus.empty()) return std::make_unique<ReportIndex>(ReportIndex::build(load_corpus_ndjson(corpus), load_terms(terms)));
  if (!config.empty()) return std::make_unique<ReportIndex>(load_runtime(config)->index());
  throw Error(ErrorCode::ConfigError, "one of --index, --corpus or --config is required");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Report generation and knowledge-grounded consultation over CAD outputs"};
  app.require_subcommand(1);

  std::string config_path;
  const auto add_config = [&](CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("-c,--config", config_path, "Service configuration file");
    if (required) opt->required();
  };

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  add_config(serve, true);
  int port = -1;
  std::string host;
  serve->add_option("--port", port, "Listen port (0 picks a free port)");
  serve->add_option("--host", host, "Listen address");

  auto* index = app.add_subcommand("index", "Report index");
  index->require_subcommand(1);
  std::string corpus, terms, out, index_file, text;
  std::size_t k = 3;
  auto* index_build = index->add_subcommand("build", "Build an index from an NDJSON corpus");
  index_build->add_option("--corpus", corpus)->required();
  index_build->add_option("--terms", terms, "Term file, one term per line");
  index_build->add_option("--out", out)->required();
  auto* index_query = index->add_subcommand("query", "Top-k reports for a text");
  index_query->add_option("--index", index_file);
  index_query->add_option("--corpus", corpus);
  index_query->add_option("--terms", terms);
  add_config(index_query, false);
  index_query->add_option("--text", text)->required();
  index_query->add_option("--k", k);

  auto* kb = app.add_subcommand("kb", "Knowledge base");
  kb->require_subcommand(1);
  std::string kb_in, tree_file, query, navigator = "llm", nav_script;
  auto* kb_ingest = kb->add_subcommand("ingest", "Ingest a directory of .md/.json documents into a tree file");
  kb_ingest->add_option("--in", kb_in)->required();
  kb_ingest->add_option("--out", out)->required();
  auto* kb_topics = kb->add_subcommand("topics", "Candidate topics for a query");
  kb_topics->add_option("--tree", tree_file);
  kb_topics->add_option("--in", kb_in);
  add_config(kb_topics, false);
  kb_topics->add_option("--query", query)->required();
  auto* kb_search = kb->add_subcommand("search", "Depth-first knowledge search; prints the trace");
  kb_search->add_option("--tree", tree_file);
  kb_search->add_option("--in", kb_in);
  add_config(kb_search, false);
  kb_search->add_option("--query", query)->required();
  kb_search->add_option("--navigator", navigator)->check(CLI::IsMember({"llm", "script"}));
  kb_search->add_option("--script", nav_script, "Navigator script (JSON list) for --navigator script");
  RetrievalOptions retrieval;
  kb_search->add_option("--budget", retrieval.budget);
  kb_search->add_option("--max-depth", retrieval.max_depth);

  auto* report = app.add_subcommand("report", "Generate a report; prints the trace");
  add_config(report, true);
  std::string image, style;
  std::optional<std::size_t> report_k;
  report->add_option("--image", image)->required();
  report->add_option("--k", report_k);
  report->add_option("--style", style)->check(CLI::IsMember({"P1", "P2", "P3"}));

  auto* chat = app.add_subcommand("chat", "Ask one question; prints the response");
  add_config(chat, true);
  std::string message, session_id;
  chat->add_option("-m,--message", message)->required();
  chat->add_option("--session", session_id);

  auto* eval = app.add_subcommand("eval", "Score generated reports against references");
  eval->require_subcommand(1);
  std::string cand_file, ref_file;
  auto* eval_nlg = eval->add_subcommand("nlg", "Corpus BLEU-1..4 and ROUGE-L");
  auto* eval_ce = eval->add_subcommand("ce", "Clinical efficacy precision, recall and F1");
  for (auto* cmd : {eval_nlg, eval_ce}) {
    cmd->add_option("--candidates", cand_file, "NDJSON {id, text}")->required();
    cmd->add_option("--references", ref_file, "NDJSON {id, text}")->required();
  }
  eval_ce->add_option("--terms", terms, "Label term file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const auto open_tree = [&]() -> KnowledgeTree {
    if (!tree_file.empty()) return KnowledgeTree::load(tree_file);
    if (!kb_in.empty()) return ingest_directory(kb_in);
    if (!config_path.empty()) return load_runtime(config_path)->tree();
    throw Error(ErrorCode::ConfigError, "one of --tree, --in or --config is required");
  };

  try {
    if (*serve) {
      auto runtime = load_runtime(config_path);
      Service service(runtime);
      sigset_t stop_signals;
      sigemptyset(&stop_signals);
      sigaddset(&stop_signals, SIGTERM);
      sigaddset(&stop_signals, SIGINT);
      pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
      std::thread([&service, stop_signals] {
        int sig = 0;
        sigwait(&stop_signals, &sig);
        service.stop();
      }).detach();
      const auto& cfg = runtime->config();
      const bool ok = service.listen(host.empty() ? cfg.host : host, port >= 0 ? port : cfg.port, [](int p) {
        std::cout << "listening on port " << p << std::endl;
      });
      if (!ok) {
        std::cerr << "error: cannot bind listen address\n";
        return kExitConfig;
      }
      return kExitOk;
    }

    if (*index_build) {
      const auto idx = ReportIndex::build(load_corpus_ndjson(corpus), load_terms(terms));
      idx.save(out);
      std::cout << json{{"records", idx.size()}, {"excluded", idx.excluded_count()}, {"terms", idx.terms().size()}}.dump()
                << "\n";
      return kExitOk;
    }
    if (*index_query) {
      const auto idx = open_index(index_file, corpus, terms, config_path);
      json hits = json::array();
      for (const auto& h : idx->query_top_k(text, k)) {
        hits.push_back({{"id", h.record->doc_id}, {"record", h.record->id}, {"distance", h.distance}});
      }
      std::cout << hits.dump(2) << "\n";
      return kExitOk;
    }

    if (*kb_ingest) {
      const auto tree = ingest_directory(kb_in);
      tree.save(out);
      std::cout << json{{"topics", tree.roots().size()}, {"nodes", tree.node_count()}}.dump() << "\n";
      return kExitOk;
    }
    if (*kb_topics) {
      std::cout << json(open_tree().candidate_topics(query, 5)).dump(2) << "\n";
      return kExitOk;
    }
    if (*kb_search) {
      std::shared_ptr<Runtime> runtime;
      std::unique_ptr<Navigator> nav;
      std::optional<KnowledgeTree> tree;
      PromptTemplates templates = PromptTemplates::defaults();
      if (navigator == "script") {
        if (nav_script.empty()) throw Error(ErrorCode::ConfigError, "--navigator script needs --script");
        nav = std::make_unique<ScriptedNavigator>(ScriptedNavigator::load(nav_script));
        tree = open_tree();
      } else {
        if (config_path.empty()) throw Error(ErrorCode::ConfigError, "--navigator llm needs --config");
        runtime = load_runtime(config_path);
        nav = std::make_unique<LlmNavigator>(runtime->llm(), runtime->config().llm.settings);
        templates = runtime->templates();
        tree = (tree_file.empty() && kb_in.empty()) ? runtime->tree() : open_tree();
      }
      const auto trace = retrieve_knowledge(query, *tree, *nav, templates, retrieval);
      std::cout << to_json(trace).dump(2) << "\n";
      return kExitOk;
    }

    if (*report) {
      auto runtime = load_runtime(config_path);
      const auto& cfg = runtime->config();
      PromptStyle ps = cfg.style;
      if (!style.empty()) ps = *parse_prompt_style(style);
      const auto trace = generate_report(image, report_k.value_or(cfg.k), ps, runtime->pipeline_context());
      std::cout << to_json(trace).dump(2) << "\n";
      return kExitOk;
    }

    if (*chat) {
      Service service(load_runtime(config_path));
      json body{{"message", message}};
      if (!session_id.empty()) body["session_id"] = session_id;
      const auto resp = service.chat(body.dump());
      std::cout << json::parse(resp.body).dump(2) << "\n";
      return resp.status == 200 ? kExitOk : kExitDomain;
    }

    if (*eval_nlg) {
      const auto [c, r] = paired(cand_file, ref_file);
      json res;
      for (int n = 1; n <= 4; ++n) res["bleu" + std::to_string(n)] = corpus_bleu(c, r, n);
      res["rouge_l"] = corpus_rouge_l(c, r);
      res["count"] = c.size();
      std::cout << res.dump(2) << "\n";
      return kExitOk;
    }
    if (*eval_ce) {
      const auto [c, r] = paired(cand_file, ref_file);
      const auto label_terms = load_terms(terms);
      std::vector<LabelVector> pred, truth;
      for (std::size_t i = 0; i < c.size(); ++i) {
        pred.push_back(extract_labels(c[i], label_terms));
        truth.push_back(extract_labels(r[i], label_terms));
      }
      const auto s = ce_scores(pred, truth);
      std::cout << json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
                        {"tp", s.tp},               {"fp", s.fp},         {"fn", s.fn}}
                       .dump(2)
                << "\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError ? kExitConfig : kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitOk;
}
