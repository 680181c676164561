#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kgrag/kg_store.hpp"
#include "kgrag/llm_gateway.hpp"
#include "kgrag/llm_query.hpp"
#include "kgrag/prompts.hpp"

namespace kgrag {

enum class StopReason {
  llm_stop,         // reply contained <STOP>
  no_new_info,      // the turn resolved no id outside retrieved_ids
  no_result,        // class identification found nothing, fallback included
  iteration_cap,    // configured expansion limit reached
  backend_failure,  // transport, protocol or script error; see failure
};

std::string_view stop_reason_name(StopReason reason);
StopReason parse_stop_reason(std::string_view name);

struct TraversalConfig {
  int iteration_cap = 25;
};

/// One turn of the search. Iteration 0 is the setup turn that presents the
/// start nodes; expansion turns are numbered from 1.
struct TraceRecord {
  int iteration = 0;
  std::string query_kind;  // start, nodes, instances_of, malformed
  std::vector<std::string> requested;
  std::vector<std::string> resolved;
  std::size_t new_nodes = 0;
  std::size_t info_chars = 0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct RetrievedNode {
  Node node;
  int iteration = 0;
  std::string structure;

  friend bool operator==(const RetrievedNode&, const RetrievedNode&) = default;
};

struct RetrievalSession {
  std::string query;
  ChatHistory history;
  std::vector<std::string> classes;
  std::vector<std::string> start_nodes;
  /// Retrieved nodes in first-retrieval order; ids are unique.
  std::vector<RetrievedNode> node_dict;
  std::set<std::string> retrieved_ids;
  /// Expansion turns performed (the setup turn is not counted).
  int iteration = 0;
  std::optional<StopReason> stop_reason;
  std::string failure;
  std::vector<TraceRecord> trace;
  std::vector<std::string> warnings;

  bool has_node(std::string_view id) const;
  std::vector<std::string> node_ids() const;
};

/// Reads one assistant reply. `<STOP>` anywhere wins; otherwise the first
/// fenced code block (if any) is searched for the JSON payload, which spans
/// from the first bracket to the last matching closing bracket. Ids are
/// normalized and deduplicated in first-occurrence order.
LlmQuery parse_llm_json(std::string_view text);

struct ClassSelection {
  std::vector<std::string> classes;
  ChatHistory history;
  std::vector<std::string> warnings;

  bool no_result() const { return classes.empty(); }
};

/// Asks for the relevant ontology classes; retries once with the fallback
/// prompt when nothing valid comes back. Both turns stay in the history.
ClassSelection identify_classes(std::string_view query, const KnowledgeGraph& graph,
                                LlmClient& client, const PromptCatalog& prompts = PromptCatalog::defaults());

/// Asks for the start instances, continuing `history`. Only instance ids of
/// the graph survive; an empty result is legal.
std::vector<std::string> identify_start_nodes(const std::vector<std::string>& classes,
                                              std::string_view query, const KnowledgeGraph& graph,
                                              LlmClient& client, ChatHistory& history,
                                              std::vector<std::string>& warnings,
                                              const PromptCatalog& prompts = PromptCatalog::defaults());

/// Full traversal: class identification, start nodes, then the iterative
/// search until the LLM stops, a turn adds no unseen node, or the cap fires.
/// Backend errors end the session with StopReason::backend_failure.
RetrievalSession ontology_based_retrieval(const KnowledgeGraph& graph, std::string_view query,
                                          LlmClient& client, const TraversalConfig& config = {},
                                          const PromptCatalog& prompts = PromptCatalog::defaults());

RetrievalSession ontology_based_retrieval(const KnowledgeGraph& graph, std::string_view query,
                                          const BackendConfig& backend, const TraversalConfig& config = {},
                                          const PromptCatalog& prompts = PromptCatalog::defaults());

std::string render_trace(const RetrievalSession& session);

}  // namespace kgrag
