#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kgrag/answer.hpp"
#include "kgrag/kg_store.hpp"
#include "kgrag/llm_gateway.hpp"
#include "kgrag/prompts.hpp"
#include "kgrag/traversal.hpp"

namespace httplib {
class Server;
}

namespace kgrag {

struct QueryRequest {
  std::string question;
  std::optional<RoleProfile> role_profile;
  std::optional<std::string> backend;
};

struct QueryResponse {
  std::string answer;
  std::vector<std::string> classes;
  std::vector<std::string> start_nodes;
  std::vector<TraceRecord> trace;
  StopReason stop_reason = StopReason::no_result;
  int iterations = 0;
  std::vector<std::string> node_ids;
  std::vector<std::string> cited_node_ids;
  RoleProfile role_profile = RoleProfile::none;
  double elapsed_ms = 0;
};

/// Carries the HTTP status a failure maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Throws ServiceError(400) on malformed JSON or unknown role.
QueryRequest parse_query_request(std::string_view body);

/// JSON body for a response. Timing is not part of the body; see
/// QueryService::mount.
std::string query_response_json(const QueryResponse& response);

struct ServiceOptions {
  TraversalConfig traversal;
  PromptCatalog prompts = PromptCatalog::defaults();
  std::shared_ptr<ExchangeSink> exchange_log;
};

/// Stateless facade over traversal and answer composition. Every request
/// gets its own session and backend client; the graph and backend configs
/// are shared read-only, so concurrent calls are safe.
class QueryService {
 public:
  QueryService(std::shared_ptr<const KnowledgeGraph> graph, std::map<std::string, BackendConfig> backends,
               std::string default_backend, ServiceOptions options = {});

  /// Throws ServiceError: 400 for an empty question or unknown backend,
  /// 502 when the backend fails. `session_out`, when given, receives the
  /// terminated retrieval session.
  QueryResponse handle_query(const QueryRequest& request, RetrievalSession* session_out = nullptr) const;

  const std::string& serve_schema() const { return schema_; }
  /// std::nullopt for an unknown id.
  std::optional<std::string> serve_node(std::string_view id) const;

  const KnowledgeGraph& graph() const { return *graph_; }

  /// Registers POST /api/query, GET /api/schema, GET /api/node/{id} and
  /// GET /api/health. Query timing goes into a Server-Timing header.
  void mount(httplib::Server& server) const;

 private:
  std::shared_ptr<const KnowledgeGraph> graph_;
  std::map<std::string, BackendConfig> backends_;
  std::string default_backend_;
  ServiceOptions options_;
  std::string schema_;
};

/// Plain-text answer followed by the rendered trace, as printed by the CLI.
std::string render_one_shot(const QueryResponse& response, const RetrievalSession& session);

}  // namespace kgrag
