#include <gtest/gtest.h>
#include <httplib.h>

#include <chrono>
#include <fstream>
#include <future>
#include <random>
#include <thread>

#include "chatcad/error.hpp"
#include "chatcad/service.hpp"
#include "support/world.hpp"

namespace chatcad {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using testing::fixture;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("chatcad-svc-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  [[nodiscard]] const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

json base_config(const fs::path& data_dir, const std::string& navigator_script = "nav_found.json") {
  return json{
      {"data_dir", data_dir.string()},
      {"llm",
       {{"backend", "mock"},
        {"rules",
         {{{"pattern", "Example report 1:\\n([^\\n]*)"}, {"reply", "{1}"}},
          {{"pattern", "network\\(s\\):\\n([\\s\\S]*?)\\nWrite a report"}, {"reply", "Findings: {1}"}},
          {{"pattern", "Knowledge:\\n([\\s\\S]*?)\\n\\nQuestion:"}, {"reply", "Grounded: {1}"}},
          {{"pattern", "No reference knowledge was found"}, {"reply", "Please consult a clinician."}}}},
        {"fallback", "unsure"}}},
      {"embeddings", fixture("embeddings.json").string()},
      {"domains",
       {{{"id", "chest-xray"}, {"description", "a chest X-ray image"}, {"cad", fixture("cad_chest.json").string()}},
        {{"id", "dental-xray"}, {"description", "a dental X-ray image"}, {"cad", fixture("cad_dental.json").string()}},
        {{"id", "knee-mri"}, {"description", "a knee MRI image"}, {"cad", fixture("cad_knee.json").string()}}}},
      {"corpus", fixture("corpus.ndjson").string()},
      {"knowledge", {{"dir", fixture("kb").string()}}},
      {"chat", {{"navigator", "script"}, {"script", fixture(navigator_script).string()}}},
  };
}

std::unique_ptr<Service> make_service(const json& cfg, const fs::path& base) {
  auto config = ServiceConfig::from_json(cfg, base);
  config.validate();
  return std::make_unique<Service>(std::make_shared<Runtime>(config));
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override { svc = make_service(base_config(dir.path() / "data"), dir.path()); }
  TempDir dir;
  std::unique_ptr<Service> svc;
};

TEST_F(ServiceTest, ReportReturnsRetrievableTrace) {
  const auto r = svc->report(R"({"image_id":"img1","k":3})");
  ASSERT_EQ(r.status, 200) << r.body;
  const auto body = json::parse(r.body);
  EXPECT_FALSE(body["report"].get<std::string>().empty());
  EXPECT_EQ(body["domain_id"], "chest-xray");
  EXPECT_EQ(body["k_used"], 3);
  const auto t = svc->trace(body["trace_id"]);
  ASSERT_EQ(t.status, 200);
  const auto trace = json::parse(t.body);
  EXPECT_EQ(trace["enhanced_report"], body["report"]);
  EXPECT_EQ(trace["preliminary_report"], body["preliminary_report"]);
}

TEST_F(ServiceTest, ReportIsIdempotentUnderMock) {
  const auto a = json::parse(svc->report(R"({"image_id":"img2","k":2})").body);
  const auto b = json::parse(svc->report(R"({"image_id":"img2","k":2})").body);
  EXPECT_EQ(a["report"], b["report"]);
  EXPECT_NE(a["trace_id"], b["trace_id"]);
}

TEST_F(ServiceTest, ReportKZeroKeepsPreliminary) {
  const auto body = json::parse(svc->report(R"({"image_id":"img1","k":0})").body);
  EXPECT_EQ(body["report"], body["preliminary_report"]);
  EXPECT_EQ(body["k_used"], 0);
}

TEST_F(ServiceTest, ReportErrors) {
  EXPECT_EQ(svc->report(R"({"image_id":"nope"})").status, 404);
  EXPECT_EQ(svc->report(R"({"image_id":"img1","k":9})").status, 400);
  EXPECT_EQ(svc->report(R"({"image_id":"img1","k":-1})").status, 400);
  EXPECT_EQ(svc->report(R"({"image_id":"img1","k":"3"})").status, 400);
  EXPECT_EQ(svc->report(R"({"image_id":"img1","style":"P7"})").status, 400);
  EXPECT_EQ(svc->report(R"({"k":1})").status, 400);
  EXPECT_EQ(svc->report("not json").status, 400);
  EXPECT_EQ(svc->report(R"({"image_id":"img1","session_id":"s-missing"})").status, 404);
  const auto err = json::parse(svc->report(R"({"image_id":"nope"})").body);
  EXPECT_EQ(err["error"]["code"], "UnknownImage");
}

TEST_F(ServiceTest, ReportStylesAccepted) {
  for (const char* s : {"P1", "P2", "P3"}) {
    EXPECT_EQ(svc->report(json{{"image_id", "img1"}, {"style", s}}.dump()).status, 200) << s;
  }
}

TEST_F(ServiceTest, ChatFoundCarriesCitation) {
  const auto r = svc->chat(R"({"message":"Is pleural effusion serious?"})");
  ASSERT_EQ(r.status, 200) << r.body;
  const auto body = json::parse(r.body);
  EXPECT_FALSE(body["ungrounded"].get<bool>());
  EXPECT_EQ(body["outcome"], "found");
  EXPECT_EQ(body["citation"]["path"], json({"Pleural Effusion", "Symptoms and Signs"}));
  EXPECT_FALSE(body["citation"]["excerpt"].get<std::string>().empty());
  EXPECT_EQ(body["answer"].get<std::string>().rfind("Grounded: ", 0), 0u);
  const auto trace = json::parse(svc->trace(body["trace_id"]).body);
  EXPECT_EQ(trace["kind"], "retrieval");
  EXPECT_EQ(trace["outcome"], "found");
  EXPECT_TRUE(trace["grounded"].get<bool>());
}

TEST(ServiceChat, AlwaysBackIsUngrounded) {
  TempDir dir;
  auto svc = make_service(base_config(dir.path() / "data", "nav_back.json"), dir.path());
  const auto body = json::parse(svc->chat(R"({"message":"Is pleural effusion serious?"})").body);
  EXPECT_TRUE(body["ungrounded"].get<bool>());
  EXPECT_EQ(body["outcome"], "exhausted");
  EXPECT_TRUE(body["citation"].is_null());
  EXPECT_EQ(body["answer"], "Please consult a clinician.");
}

TEST_F(ServiceTest, TwoMessagesGiveFourTurns) {
  const auto first = json::parse(svc->chat(R"({"message":"Is pleural effusion serious?"})").body);
  const std::string sid = first["session_id"];
  const auto second = svc->chat(json{{"session_id", sid}, {"message", "How is it treated?"}}.dump());
  ASSERT_EQ(second.status, 200);
  const auto session = json::parse(svc->session(sid).body);
  ASSERT_EQ(session["turns"].size(), 4u);
  EXPECT_EQ(session["turns"][0]["role"], "user");
  EXPECT_EQ(session["turns"][1]["role"], "assistant");
  EXPECT_EQ(session["turns"][2]["role"], "user");
  EXPECT_EQ(session["turns"][3]["role"], "assistant");
  const auto& att = session["turns"][3]["attachment"];
  EXPECT_EQ(att["kind"], "retrieval");
  EXPECT_EQ(svc->trace(att["id"]).status, 200);
}

TEST_F(ServiceTest, ChatErrors) {
  EXPECT_EQ(svc->chat(R"({"message":""})").status, 400);
  EXPECT_EQ(svc->chat(R"({})").status, 400);
  EXPECT_EQ(svc->chat(R"({"message":"hi","session_id":"s-missing"})").status, 404);
}

TEST_F(ServiceTest, ChatUsesReportContext) {
  const auto rep = json::parse(svc->report(R"({"image_id":"img2","k":1})").body);
  ASSERT_FALSE(rep.contains("session_id"));
  const auto first = json::parse(svc->chat(R"({"message":"hello"})").body);
  const std::string sid = first["session_id"];
  const auto with_report = json::parse(svc->report(json{{"image_id", "img2"}, {"k", 1}, {"session_id", sid}}.dump()).body);
  const auto chat = json::parse(svc->chat(json{{"session_id", sid}, {"message", "What does my report mean?"}}.dump()).body);
  const auto trace = json::parse(svc->trace(chat["trace_id"]).body);
  const std::string query = trace["query"];
  EXPECT_NE(query.find("Patient report: " + with_report["report"].get<std::string>()), std::string::npos);
  EXPECT_EQ(json::parse(svc->session(sid).body)["turns"].size(), 6u);
}

TEST_F(ServiceTest, MissingIds) {
  EXPECT_EQ(svc->trace("tr-999999").status, 404);
  EXPECT_EQ(svc->session("s-0000000000000000").status, 404);
}

TEST_F(ServiceTest, CasesListed) {
  const auto body = json::parse(svc->cases().body);
  ASSERT_FALSE(body["cases"].empty());
  EXPECT_EQ(body["cases"][0]["domain_id"], "chest-xray");
}

TEST(ServiceDurability, RestartReplaysByteIdentically) {
  TempDir dir;
  const auto cfg = base_config(dir.path() / "data");
  std::vector<std::string> trace_ids;
  std::string sid;
  std::vector<std::string> trace_bodies;
  std::string session_body;
  {
    auto svc = make_service(cfg, dir.path());
    trace_ids.push_back(json::parse(svc->report(R"({"image_id":"img1","k":2})").body)["trace_id"]);
    const auto c = json::parse(svc->chat(R"({"message":"Is pleural effusion serious?"})").body);
    sid = c["session_id"];
    trace_ids.push_back(c["trace_id"]);
    trace_ids.push_back(json::parse(svc->chat(json{{"session_id", sid}, {"message", "more"}}.dump()).body)["trace_id"]);
    for (const auto& id : trace_ids) trace_bodies.push_back(svc->trace(id).body);
    session_body = svc->session(sid).body;
  }
  auto svc = make_service(cfg, dir.path());
  for (std::size_t i = 0; i < trace_ids.size(); ++i) {
    const auto r = svc->trace(trace_ids[i]);
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.body, trace_bodies[i]);
  }
  EXPECT_EQ(svc->session(sid).body, session_body);
  const auto next = json::parse(svc->report(R"({"image_id":"img1"})").body);
  EXPECT_EQ(std::find(trace_ids.begin(), trace_ids.end(), next["trace_id"]), trace_ids.end());
  ASSERT_EQ(svc->chat(json{{"session_id", sid}, {"message", "again"}}.dump()).status, 200);
  EXPECT_EQ(json::parse(svc->session(sid).body)["turns"].size(), 6u);
}

TEST(ServiceConfigTest, Errors) {
  TempDir dir;
  auto cfg = base_config(dir.path() / "data");
  cfg["bogus"] = 1;
  EXPECT_THROW(ServiceConfig::from_json(cfg, dir.path()), Error);

  cfg = base_config(dir.path() / "data");
  cfg["report"] = {{"k", 6}};
  EXPECT_THROW(ServiceConfig::from_json(cfg, dir.path()).validate(), Error);

  cfg = base_config(dir.path() / "data");
  cfg["corpus"] = (dir.path() / "missing.ndjson").string();
  EXPECT_THROW(ServiceConfig::from_json(cfg, dir.path()).validate(), Error);

  cfg = base_config(dir.path() / "data");
  cfg["llm"]["rules"] = {{{"pattern", "("}, {"reply", "x"}}};
  EXPECT_THROW(ServiceConfig::from_json(cfg, dir.path()).validate(), Error);

  try {
    ServiceConfig::load(dir.path() / "nope.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

TEST(ServiceConfigTest, DemoConfigLoads) {
  const auto demo = fs::path(CHATCAD_SOURCE_DIR) / "config" / "demo.json";
  auto config = ServiceConfig::load(demo);
  config.validate();
  TempDir dir;
  config.data_dir = dir.path();
  Service svc(std::make_shared<Runtime>(config));
  const auto body = json::parse(svc.chat(R"({"message":"Is pleural effusion serious?"})").body);
  EXPECT_EQ(body["citation"]["path"], json({"Pleural Effusion", "Symptoms and Signs"}));
  EXPECT_EQ(svc.report(R"({"image_id":"img1"})").status, 200);
}

TEST(ServiceStatus, Mapping) {
  EXPECT_EQ(http_status(ErrorCode::UnknownImage), 404);
  EXPECT_EQ(http_status(ErrorCode::NotFound), 404);
  EXPECT_EQ(http_status(ErrorCode::InvalidArgument), 400);
  EXPECT_EQ(http_status(ErrorCode::LlmUnavailable), 502);
  EXPECT_EQ(http_status(ErrorCode::IoError), 500);
}

TEST(ServiceLlm, BackendFailureIs502) {
  TempDir dir;
  auto cfg = base_config(dir.path() / "data");
  cfg["llm"] = {{"backend", "script"}, {"script", json::array()}};
  auto svc = make_service(cfg, dir.path());
  const auto r = svc->report(R"({"image_id":"img1","k":1})");
  EXPECT_EQ(r.status, 502) << r.body;
}

class HttpFixture {
 public:
  explicit HttpFixture(json cfg, const fs::path& base) : svc_(make_service(cfg, base)) {
    std::promise<int> ready;
    auto fut = ready.get_future();
    thread_ = std::thread([this, &ready] {
      if (!svc_->listen("127.0.0.1", 0, [&ready](int p) { ready.set_value(p); })) ready.set_value(-1);
    });
    port_ = fut.get();
  }
  ~HttpFixture() {
    svc_->stop();
    thread_.join();
  }
  [[nodiscard]] int port() const { return port_; }

 private:
  std::unique_ptr<Service> svc_;
  std::thread thread_;
  int port_ = -1;
};

TEST(ServiceHttp, RoutesOverHttp) {
  TempDir dir;
  HttpFixture http(base_config(dir.path() / "data"), dir.path());
  ASSERT_GT(http.port(), 0);
  httplib::Client cli("127.0.0.1", http.port());
  auto health = cli.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  auto rep = cli.Post("/v1/report", R"({"image_id":"img1","k":1})", "application/json");
  ASSERT_TRUE(rep);
  EXPECT_EQ(rep->status, 200);
  EXPECT_EQ(rep->get_header_value("Access-Control-Allow-Origin"), "*");
  const auto id = json::parse(rep->body)["trace_id"].get<std::string>();
  auto t1 = cli.Get(("/v1/trace/" + id).c_str());
  auto t2 = cli.Get(("/v1/trace/" + id).c_str());
  ASSERT_TRUE(t1 && t2);
  EXPECT_EQ(t1->status, 200);
  EXPECT_EQ(t1->body, t2->body);

  EXPECT_EQ(cli.Post("/v1/report", R"({"image_id":"img1","k":9})", "application/json")->status, 400);
  EXPECT_EQ(cli.Post("/v1/chat", R"({"message":""})", "application/json")->status, 400);
  EXPECT_EQ(cli.Get("/v1/trace/tr-999999")->status, 404);
  EXPECT_EQ(cli.Get("/v1/sessions/none")->status, 404);

  auto chat = cli.Post("/v1/chat", R"({"message":"Is pleural effusion serious?"})", "application/json");
  ASSERT_TRUE(chat);
  const auto sid = json::parse(chat->body)["session_id"].get<std::string>();
  auto session = cli.Get(("/v1/sessions/" + sid).c_str());
  EXPECT_EQ(session->status, 200);
  EXPECT_EQ(json::parse(session->body)["turns"].size(), 2u);

  auto pre = cli.Options("/v1/chat");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_FALSE(pre->get_header_value("Access-Control-Allow-Methods").empty());
}

TEST(ServiceHttp, ApiToken) {
  TempDir dir;
  auto cfg = base_config(dir.path() / "data");
  cfg["api_token"] = "sekret";
  HttpFixture http(cfg, dir.path());
  httplib::Client cli("127.0.0.1", http.port());
  EXPECT_EQ(cli.Get("/v1/cases")->status, 401);
  httplib::Headers bad{{"Authorization", "Bearer wrong"}};
  EXPECT_EQ(cli.Get("/v1/cases", bad)->status, 401);
  httplib::Headers good{{"Authorization", "Bearer sekret"}};
  EXPECT_EQ(cli.Get("/v1/cases", good)->status, 200);
  EXPECT_EQ(cli.Options("/v1/cases")->status, 204);
}

TEST(ServiceConcurrency, ParallelChatsInOneSession) {
  TempDir dir;
  auto svc = make_service(base_config(dir.path() / "data", "nav_back.json"), dir.path());
  const std::string sid = json::parse(svc->chat(R"({"message":"start"})").body)["session_id"];
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      svc->chat(json{{"session_id", sid}, {"message", "q" + std::to_string(i)}}.dump());
    });
  }
  for (auto& t : threads) t.join();
  const auto turns = json::parse(svc->session(sid).body)["turns"];
  ASSERT_EQ(turns.size(), 18u);
  for (std::size_t i = 0; i < turns.size(); i += 2) {
    EXPECT_EQ(turns[i]["role"], "user");
    EXPECT_EQ(turns[i + 1]["role"], "assistant");
    EXPECT_NE(turns[i + 1]["text"], "");
  }
}

}  // namespace
}  // namespace chatcad
