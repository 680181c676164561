#include "kgrag/query_service.hpp"

#include <chrono>

#include <httplib.h>
#include <json.hpp>

namespace kgrag {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

QueryRequest parse_query_request(std::string_view body) {
  json doc = json::parse(body.begin(), body.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ServiceError(400, "request body must be a JSON object");
  QueryRequest req;
  auto q = doc.find("question");
  if (q == doc.end() || !q->is_string()) throw ServiceError(400, "'question' must be a string");
  req.question = q->get<std::string>();
  if (auto r = doc.find("role_profile"); r != doc.end() && !r->is_null()) {
    if (!r->is_string()) throw ServiceError(400, "'role_profile' must be a string");
    try {
      req.role_profile = parse_role_profile(r->get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ServiceError(400, e.what());
    }
  }
  if (auto b = doc.find("backend"); b != doc.end() && !b->is_null()) {
    if (!b->is_string()) throw ServiceError(400, "'backend' must be a string");
    req.backend = b->get<std::string>();
  }
  return req;
}

std::string query_response_json(const QueryResponse& r) {
  ordered_json doc;
  doc["answer"] = r.answer;
  doc["stop_reason"] = stop_reason_name(r.stop_reason);
  doc["iterations"] = r.iterations;
  doc["role_profile"] = role_profile_name(r.role_profile);
  doc["classes"] = r.classes;
  doc["start_nodes"] = r.start_nodes;
  doc["trace"] = ordered_json::array();
  for (const auto& t : r.trace) {
    doc["trace"].push_back({{"iteration", t.iteration},
                            {"query_kind", t.query_kind},
                            {"requested", t.requested},
                            {"resolved", t.resolved},
                            {"new_nodes", t.new_nodes},
                            {"info_chars", t.info_chars}});
  }
  doc["node_ids"] = r.node_ids;
  doc["cited_node_ids"] = r.cited_node_ids;
  return doc.dump();
}

QueryService::QueryService(std::shared_ptr<const KnowledgeGraph> graph, std::map<std::string, BackendConfig> backends,
                           std::string default_backend, ServiceOptions options)
    : graph_(std::move(graph)),
      backends_(std::move(backends)),
      default_backend_(std::move(default_backend)),
      options_(std::move(options)) {
  if (!graph_) throw std::invalid_argument("QueryService needs a graph");
  if (backends_.find(default_backend_) == backends_.end()) {
    throw std::invalid_argument("default backend '" + default_backend_ + "' is not configured");
  }
  for (const auto& [name, config] : backends_) config.validate();
  options_.prompts.validate();
  if (options_.traversal.iteration_cap < 1) throw std::invalid_argument("iteration cap must be at least 1");
  schema_ = class_schema_summary(*graph_);
}

QueryResponse QueryService::handle_query(const QueryRequest& request, RetrievalSession* session_out) const {
  const auto started = std::chrono::steady_clock::now();
  const auto question = normalize_id(request.question);
  if (question.empty()) throw ServiceError(400, "question must not be empty");

  const auto& name = request.backend ? *request.backend : default_backend_;
  auto backend = backends_.find(name);
  if (backend == backends_.end()) throw ServiceError(400, "unknown backend '" + name + "'");

  auto client = make_client(backend->second, options_.exchange_log);
  auto session = ontology_based_retrieval(*graph_, request.question, *client, options_.traversal, options_.prompts);
  if (*session.stop_reason == StopReason::backend_failure) {
    const auto msg = "backend failure: " + session.failure;
    if (session_out != nullptr) *session_out = std::move(session);
    throw ServiceError(502, msg);
  }

  QueryResponse r;
  r.role_profile = request.role_profile.value_or(RoleProfile::none);
  try {
    auto ex = compose_answer(session, r.role_profile, *client, options_.prompts);
    r.answer = std::move(ex.answer);
    r.cited_node_ids = std::move(ex.cited_node_ids);
  } catch (const LlmError& e) {
    if (session_out != nullptr) *session_out = std::move(session);
    throw ServiceError(502, std::string("backend failure while composing the answer: ") + e.what());
  }
  r.classes = session.classes;
  r.start_nodes = session.start_nodes;
  r.trace = session.trace;
  r.stop_reason = *session.stop_reason;
  r.iterations = session.iteration;
  r.node_ids = session.node_ids();
  r.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  if (session_out != nullptr) *session_out = std::move(session);
  return r;
}

std::optional<std::string> QueryService::serve_node(std::string_view id) const {
  if (!graph_->contains(id)) return std::nullopt;
  return get_node_structure(*graph_, id);
}

void QueryService::mount(httplib::Server& server) const {
  auto error_body = [](const std::string& message) { return json{{"error", message}}.dump(); };

  server.Post("/api/query", [this, error_body](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto response = handle_query(parse_query_request(req.body));
      res.set_header("Server-Timing", "total;dur=" + std::to_string(response.elapsed_ms));
      res.set_content(query_response_json(response), "application/json");
    } catch (const ServiceError& e) {
      res.status = e.status();
      res.set_content(error_body(e.what()), "application/json");
    }
  });
  server.Get("/api/schema", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(schema_, "text/plain; charset=utf-8");
  });
  server.Get(R"(/api/node/(.+))", [this, error_body](const httplib::Request& req, httplib::Response& res) {
    const auto id = req.matches[1].str();
    if (auto text = serve_node(id)) {
      res.set_content(*text, "text/plain; charset=utf-8");
    } else {
      res.status = 404;
      res.set_content(error_body("unknown node id: " + id), "application/json");
    }
  });
  server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });
  server.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
  });
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

std::string render_one_shot(const QueryResponse& response, const RetrievalSession& session) {
  std::string out = response.answer;
  if (!out.empty() && out.back() != '\n') out.push_back('\n');
  out += "\n--- trace ---\n";
  out += render_trace(session);
  if (!response.cited_node_ids.empty()) {
    out += "cited:";
    for (const auto& id : response.cited_node_ids) out += " " + id;
    out += "\n";
  }
  return out;
}

}  // namespace kgrag
