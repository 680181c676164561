#include <gtest/gtest.h>

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "kgrag/demo_kg.hpp"
#include "kgrag/query_service.hpp"
#include "support.hpp"

using namespace kgrag;
using json = nlohmann::json;

namespace {

std::shared_ptr<const KnowledgeGraph> demo() {
  static const auto g = std::make_shared<const KnowledgeGraph>(build_demo_kg());
  return g;
}

QueryService demo_service() {
  auto robustness = scripted_backend({});
  robustness.script = std::make_shared<Script>(load_script_file(fx::fixture_path("robustness_script.json")));
  return QueryService(demo(),
                      {{"demo", scripted_backend(demo_script().ordered)},
                       {"robustness", robustness},
                       {"mute", scripted_backend({})}},
                      "demo");
}

QueryRequest ask(std::string q, std::optional<std::string> backend = std::nullopt) {
  return {std::move(q), std::nullopt, std::move(backend)};
}

/// Serves `service` on a random local port for the lifetime of the object.
class LiveServer {
 public:
  explicit LiveServer(const QueryService& service) {
    service.mount(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(10, 0);
    return c;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(HandleQuery, DemoQuestion) {
  const auto service = demo_service();
  RetrievalSession session;
  auto r = service.handle_query(ask(std::string(kDemoQuestion)), &session);
  EXPECT_EQ(r.stop_reason, StopReason::llm_stop);
  EXPECT_EQ(r.iterations, 2);
  EXPECT_EQ(r.iterations, session.iteration);
  EXPECT_NE(r.answer.find("ScrewPlacement"), std::string::npos);
  EXPECT_EQ(r.classes, (std::vector<std::string>{"Dataset"}));
  EXPECT_EQ(r.start_nodes, (std::vector<std::string>{"niryo_dataset_september_2024"}));
  EXPECT_EQ(r.node_ids, session.node_ids());
  EXPECT_EQ(r.role_profile, RoleProfile::none);
  EXPECT_GE(r.elapsed_ms, 0);
}

TEST(HandleQuery, MatchesTheLibraryPipeline) {
  const auto service = demo_service();
  auto r = service.handle_query(ask(std::string(kDemoQuestion)));
  auto client = make_client(scripted_backend(demo_script().ordered));
  auto session = ontology_based_retrieval(*demo(), kDemoQuestion, *client);
  auto ex = compose_answer(session, RoleProfile::none, *client);
  EXPECT_EQ(r.iterations, session.iteration);
  EXPECT_EQ(r.trace, session.trace);
  EXPECT_EQ(r.answer, ex.answer);
  EXPECT_EQ(r.cited_node_ids, ex.cited_node_ids);
}

TEST(HandleQuery, RequestsDoNotShareScriptCursors) {
  const auto service = demo_service();
  const auto a = query_response_json(service.handle_query(ask(std::string(kDemoQuestion))));
  const auto b = query_response_json(service.handle_query(ask(std::string(kDemoQuestion))));
  EXPECT_EQ(a, b);
}

TEST(HandleQuery, EmptyQuestionIs400) {
  const auto service = demo_service();
  for (const auto* q : {"", "   ", "\n\t"}) {
    try {
      service.handle_query(ask(q));
      FAIL() << "accepted '" << q << "'";
    } catch (const ServiceError& e) {
      EXPECT_EQ(e.status(), 400);
    }
  }
}

TEST(HandleQuery, UnknownBackendIs400) {
  const auto service = demo_service();
  try {
    service.handle_query(ask("hi", "gpt-9"));
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.status(), 400);
  }
}

TEST(HandleQuery, BackendFailureIs502) {
  const auto service = demo_service();
  RetrievalSession session;
  try {
    service.handle_query(ask("anything", "mute"), &session);
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.status(), 502);
    EXPECT_NE(std::string(e.what()).find("script_exhausted"), std::string::npos) << e.what();
  }
  EXPECT_EQ(session.stop_reason, StopReason::backend_failure);
}

TEST(HandleQuery, OutOfScopeIsNoResultNot500) {
  QueryService service(demo(), {{"s", scripted_backend({"[]", "[]"})}}, "s");
  auto r = service.handle_query(ask("What is the weather like?"));
  EXPECT_EQ(r.stop_reason, StopReason::no_result);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.answer, PromptCatalog::defaults().answer_no_result);
}

TEST(HandleQuery, RoleIsEchoed) {
  const auto service = demo_service();
  auto r = service.handle_query({"What task is easier?", RoleProfile::worker, "robustness"});
  EXPECT_EQ(r.role_profile, RoleProfile::worker);
  EXPECT_NE(r.answer.find("ScrewPicking"), std::string::npos);
}

TEST(Construction, RejectsBadConfiguration) {
  EXPECT_THROW(QueryService(nullptr, {{"a", scripted_backend({})}}, "a"), std::invalid_argument);
  EXPECT_THROW(QueryService(demo(), {{"a", scripted_backend({})}}, "b"), std::invalid_argument);
  ServiceOptions zero_cap;
  zero_cap.traversal.iteration_cap = 0;
  EXPECT_THROW(QueryService(demo(), {{"a", scripted_backend({})}}, "a", zero_cap), std::invalid_argument);
}

TEST(ParseQueryRequest, Fields) {
  auto r = parse_query_request(R"({"question": "q", "role_profile": "developer", "backend": "x"})");
  EXPECT_EQ(r.question, "q");
  EXPECT_EQ(r.role_profile, RoleProfile::developer);
  EXPECT_EQ(r.backend, "x");
  auto bare = parse_query_request(R"({"question": "q", "role_profile": null})");
  EXPECT_FALSE(bare.role_profile);
  EXPECT_FALSE(bare.backend);
}

TEST(ParseQueryRequest, Errors) {
  for (const auto* body : {"", "nope", "[]", "{}", R"({"question": 3})", R"({"question": "q", "role_profile": "boss"})",
                           R"({"question": "q", "role_profile": 1})", R"({"question": "q", "backend": []})"}) {
    try {
      parse_query_request(body);
      FAIL() << body;
    } catch (const ServiceError& e) {
      EXPECT_EQ(e.status(), 400) << body;
    }
  }
}

TEST(ResponseJson, Shape) {
  const auto service = demo_service();
  auto doc = json::parse(query_response_json(service.handle_query(ask(std::string(kDemoQuestion)))));
  EXPECT_EQ(doc["stop_reason"], "llm_stop");
  EXPECT_EQ(doc["iterations"], 2);
  EXPECT_EQ(doc["role_profile"], "none");
  EXPECT_TRUE(doc["trace"].is_array());
  EXPECT_EQ(doc["trace"].size(), 3u);
  EXPECT_EQ(doc["trace"][0]["iteration"], 0);
  for (const auto* key : {"answer", "classes", "start_nodes", "node_ids", "cited_node_ids"}) {
    EXPECT_TRUE(doc.contains(key)) << key;
  }
  EXPECT_FALSE(doc.contains("elapsed_ms"));
}

TEST(Serve, SchemaAndNode) {
  const auto service = demo_service();
  EXPECT_EQ(service.serve_schema(), class_schema_summary(*demo()));
  EXPECT_EQ(service.serve_node("model_a23b"), get_node_structure(*demo(), "model_a23b"));
  EXPECT_FALSE(service.serve_node("ghost"));
}

TEST(RenderOneShot, AnswerThenTrace) {
  const auto service = demo_service();
  RetrievalSession session;
  auto r = service.handle_query(ask(std::string(kDemoQuestion)), &session);
  auto text = render_one_shot(r, session);
  EXPECT_EQ(text.rfind(r.answer, 0), 0u);
  EXPECT_NE(text.find("--- trace ---\n" + render_trace(session)), std::string::npos);
  EXPECT_NE(text.find("stop: llm_stop after 2 expansion iterations"), std::string::npos);
}

TEST(Http, QueryEndpoint) {
  const auto service = demo_service();
  LiveServer live(service);
  auto c = live.client();
  const auto body = json{{"question", kDemoQuestion}}.dump();
  auto first = c.Post("/api/query", body, "application/json");
  ASSERT_TRUE(first);
  EXPECT_EQ(first->status, 200);
  EXPECT_EQ(first->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(first->get_header_value("Server-Timing").rfind("total;dur=", 0), 0u);
  auto doc = json::parse(first->body);
  RetrievalSession session;
  auto library = service.handle_query(ask(std::string(kDemoQuestion)), &session);
  EXPECT_EQ(doc["iterations"], session.iteration);
  EXPECT_EQ(first->body, query_response_json(library));

  auto second = c.Post("/api/query", body, "application/json");
  ASSERT_TRUE(second);
  EXPECT_EQ(second->body, first->body);
}

TEST(Http, QueryErrors) {
  const auto service = demo_service();
  LiveServer live(service);
  auto c = live.client();
  auto empty = c.Post("/api/query", R"({"question": " "})", "application/json");
  ASSERT_TRUE(empty);
  EXPECT_EQ(empty->status, 400);
  EXPECT_TRUE(json::parse(empty->body).contains("error"));
  auto garbage = c.Post("/api/query", "{", "application/json");
  ASSERT_TRUE(garbage);
  EXPECT_EQ(garbage->status, 400);
  auto failing = c.Post("/api/query", R"({"question": "q", "backend": "mute"})", "application/json");
  ASSERT_TRUE(failing);
  EXPECT_EQ(failing->status, 502);
  auto weather = c.Post("/api/query", R"({"question": "What is the weather like?", "backend": "robustness"})",
                        "application/json");
  ASSERT_TRUE(weather);
  EXPECT_EQ(weather->status, 200);
}

TEST(Http, SchemaNodeHealth) {
  const auto service = demo_service();
  LiveServer live(service);
  auto c = live.client();
  auto schema = c.Get("/api/schema");
  ASSERT_TRUE(schema);
  EXPECT_EQ(schema->status, 200);
  EXPECT_EQ(schema->body, class_schema_summary(*demo()));
  auto node = c.Get("/api/node/ScrewPlacement");
  ASSERT_TRUE(node);
  EXPECT_EQ(node->body, get_node_structure(*demo(), "ScrewPlacement"));
  auto missing = c.Get("/api/node/ghost");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  auto health = c.Get("/api/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(json::parse(health->body)["status"], "ok");
}

TEST(Http, CorsPreflight) {
  const auto service = demo_service();
  LiveServer live(service);
  auto c = live.client();
  auto pre = c.Options("/api/query");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_EQ(pre->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST(Http, ConcurrentRequestsAgree) {
  const auto service = demo_service();
  LiveServer live(service);
  const auto body = json{{"question", kDemoQuestion}}.dump();
  std::vector<std::string> bodies(8);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    threads.emplace_back([&, i] {
      auto c = live.client();
      if (auto res = c.Post("/api/query", body, "application/json")) bodies[i] = res->body;
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& b : bodies) EXPECT_EQ(b, bodies.front());
  EXPECT_FALSE(bodies.front().empty());
}
