#include "kgrag/traversal.hpp"

#include <algorithm>
#include <unordered_set>

#include <json.hpp>

namespace kgrag {

using json = nlohmann::json;

std::string_view stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::llm_stop:
      return "llm_stop";
    case StopReason::no_new_info:
      return "no_new_info";
    case StopReason::no_result:
      return "no_result";
    case StopReason::iteration_cap:
      return "iteration_cap";
    case StopReason::backend_failure:
      return "backend_failure";
  }
  return "backend_failure";
}

StopReason parse_stop_reason(std::string_view name) {
  for (auto r : {StopReason::llm_stop, StopReason::no_new_info, StopReason::no_result,
                 StopReason::iteration_cap, StopReason::backend_failure}) {
    if (stop_reason_name(r) == name) return r;
  }
  throw std::invalid_argument("unknown stop reason: " + std::string(name));
}

bool RetrievalSession::has_node(std::string_view id) const {
  return std::any_of(node_dict.begin(), node_dict.end(),
                     [&](const RetrievedNode& n) { return n.node.id == id; });
}

std::vector<std::string> RetrievalSession::node_ids() const {
  std::vector<std::string> ids;
  ids.reserve(node_dict.size());
  for (const auto& n : node_dict) ids.push_back(n.node.id);
  return ids;
}

// ---------------------------------------------------------------------------
// Reply parsing

namespace {

std::string_view fenced_body(std::string_view text) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) return text;
  auto body_start = text.find('\n', open + 3);
  if (body_start == std::string_view::npos) return text.substr(open + 3);
  ++body_start;
  const auto close = text.find("```", body_start);
  return close == std::string_view::npos ? text.substr(body_start)
                                         : text.substr(body_start, close - body_start);
}

void push_unique(std::vector<std::string>& ids, std::unordered_set<std::string>& seen, std::string id) {
  if (id.empty()) return;
  if (seen.insert(id).second) ids.push_back(std::move(id));
}

// `[A, B]` with bare or loosely quoted words.
std::vector<std::string> split_bare_list(std::string_view inner) {
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen;
  std::size_t pos = 0;
  while (pos <= inner.size()) {
    auto comma = inner.find(',', pos);
    if (comma == std::string_view::npos) comma = inner.size();
    auto token = normalize_id(inner.substr(pos, comma - pos));
    while (!token.empty() && (token.front() == '"' || token.front() == '\'' || token.front() == '`')) {
      token.erase(token.begin());
    }
    while (!token.empty() && (token.back() == '"' || token.back() == '\'' || token.back() == '`')) {
      token.pop_back();
    }
    if (token.find_first_of("[]{}\"") != std::string::npos) return {};
    push_unique(ids, seen, normalize_id(token));
    pos = comma + 1;
  }
  return ids;
}

}  // namespace

LlmQuery parse_llm_json(std::string_view text) {
  if (text.find(kStopToken) != std::string_view::npos) return LlmQuery::stop();

  const auto body = fenced_body(text);
  const auto start = body.find_first_of("[{");
  if (start == std::string_view::npos) return LlmQuery::malformed();
  const char closer = body[start] == '[' ? ']' : '}';
  const auto end = body.rfind(closer);
  if (end == std::string_view::npos || end < start) return LlmQuery::malformed();
  const auto payload = body.substr(start, end - start + 1);

  json doc = json::parse(payload.begin(), payload.end(), nullptr, false);
  if (doc.is_discarded()) {
    if (closer != ']') return LlmQuery::malformed();
    auto ids = split_bare_list(payload.substr(1, payload.size() - 2));
    if (ids.empty()) return LlmQuery::malformed();
    return LlmQuery::nodes(std::move(ids));
  }

  if (doc.is_array()) {
    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    for (const auto& item : doc) {
      if (item.is_string()) push_unique(ids, seen, normalize_id(item.get<std::string>()));
    }
    if (ids.empty()) return LlmQuery::malformed();
    return LlmQuery::nodes(std::move(ids));
  }
  if (doc.is_object() && doc.size() == 1 && doc.contains("instances_of") && doc["instances_of"].is_string()) {
    auto class_id = normalize_id(doc["instances_of"].get<std::string>());
    if (class_id.empty()) return LlmQuery::malformed();
    return LlmQuery::instances_of(std::move(class_id));
  }
  return LlmQuery::malformed();
}

// ---------------------------------------------------------------------------
// Steps 1 and 2

namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i != 0) out.append(sep);
    out.append(items[i]);
  }
  return out;
}

std::vector<std::string> valid_classes(const LlmQuery& q, const KnowledgeGraph& graph,
                                       std::vector<std::string>& warnings) {
  std::vector<std::string> out;
  if (q.kind != LlmQuery::Kind::node_request) return out;
  for (const auto& id : q.ids) {
    if (graph.find_class(id) != nullptr) {
      out.push_back(id);
    } else {
      warnings.push_back("unknown class id: " + id);
    }
  }
  return out;
}

}  // namespace

ClassSelection identify_classes(std::string_view query, const KnowledgeGraph& graph, LlmClient& client,
                                const PromptCatalog& prompts) {
  ClassSelection sel;
  const auto schema = class_schema_summary(graph);
  const auto system = fill_template(prompts.step1_system, {{"ontology_structure", schema}});
  const auto user = fill_template(prompts.step1_user, {{"query", query}});

  auto reply = llm_response(client, user, system, sel.history);
  sel.classes = valid_classes(parse_llm_json(reply), graph, sel.warnings);
  if (!sel.classes.empty()) return sel;

  std::vector<std::string> all;
  for (const auto& c : graph.classes()) all.push_back(c.id);
  const auto class_list = join(all, ", ");
  const auto fallback = fill_template(prompts.step1_fallback, {{"query", query}, {"class_list", class_list}});
  reply = llm_response(client, fallback, system, sel.history);
  sel.classes = valid_classes(parse_llm_json(reply), graph, sel.warnings);
  return sel;
}

std::vector<std::string> identify_start_nodes(const std::vector<std::string>& classes, std::string_view query,
                                              const KnowledgeGraph& graph, LlmClient& client,
                                              ChatHistory& history, std::vector<std::string>& warnings,
                                              const PromptCatalog& prompts) {
  std::vector<std::string> instance_ids;
  std::unordered_set<std::string> listed;
  for (const auto& c : classes) {
    for (const auto* inst : graph.instances_of(c)) {
      if (listed.insert(inst->id).second) instance_ids.push_back(inst->id);
    }
  }
  const auto instances = instance_ids.empty() ? std::string("(none)") : join(instance_ids, ", ");
  const auto class_text = join(classes, ", ");
  const auto user = fill_template(prompts.step2_user,
                                  {{"query", query}, {"classes", class_text}, {"instances", instances}});
  // History already holds the system message from the first step.
  const auto reply = llm_response(client, user, "", history);

  std::vector<std::string> out;
  const auto q = parse_llm_json(reply);
  if (q.kind != LlmQuery::Kind::node_request) return out;
  for (const auto& id : q.ids) {
    if (graph.find_instance(id) != nullptr) {
      out.push_back(id);
    } else if (graph.find_class(id) != nullptr) {
      warnings.push_back("start node is a class, not an instance: " + id);
    } else {
      warnings.push_back("unknown start node id: " + id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Iterative search

namespace {

std::string_view query_kind_name(const LlmQuery& q) {
  switch (q.kind) {
    case LlmQuery::Kind::node_request:
      return "nodes";
    case LlmQuery::Kind::class_instances_request:
      return "instances_of";
    case LlmQuery::Kind::stop:
      return "stop";
    case LlmQuery::Kind::malformed:
      return "malformed";
  }
  return "malformed";
}

std::string_view failure_kind(const LlmError& e) {
  if (dynamic_cast<const ScriptExhaustedError*>(&e)) return "script_exhausted";
  if (dynamic_cast<const ContextOverflowError*>(&e)) return "context_overflow";
  if (dynamic_cast<const CassetteMissError*>(&e)) return "cassette_miss";
  if (dynamic_cast<const ProtocolError*>(&e)) return "protocol";
  return "transport";
}

class Search {
 public:
  Search(const KnowledgeGraph& graph, LlmClient& client, const TraversalConfig& config,
         const PromptCatalog& prompts, RetrievalSession& session)
      : graph_(graph), client_(client), config_(config), prompts_(prompts), s_(session) {}

  void run() {
    auto sel = identify_classes(s_.query, graph_, client_, prompts_);
    s_.history = std::move(sel.history);
    append(s_.warnings, sel.warnings);
    s_.classes = std::move(sel.classes);
    if (s_.classes.empty()) {
      s_.stop_reason = StopReason::no_result;
      return;
    }

    s_.start_nodes = identify_start_nodes(s_.classes, s_.query, graph_, client_, s_.history, s_.warnings, prompts_);

    // Setup turn: start nodes, or whatever the step-2 reply asks for when no
    // start node resolved.
    TraceRecord rec;
    rec.iteration = 0;
    rec.query_kind = "start";
    Resolution res = execute_query(graph_, LlmQuery::nodes(s_.start_nodes));
    rec.requested = s_.start_nodes;
    if (res.nodes.empty()) {
      const auto q = parse_llm_json(s_.history.last_assistant());
      if (q.kind == LlmQuery::Kind::class_instances_request) {
        res = execute_query(graph_, q);
        rec.query_kind = "instances_of";
        rec.requested = {q.class_id};
      }
    }
    const auto setup = fill_template(prompts_.step3_setup, {{"query", s_.query}});
    auto reply = turn(rec, res, setup);
    if (finished(reply, rec)) return;

    for (;;) {
      ++s_.iteration;
      const auto q = parse_llm_json(reply);
      TraceRecord next;
      next.iteration = s_.iteration;
      next.query_kind = query_kind_name(q);
      next.requested = q.kind == LlmQuery::Kind::class_instances_request ? std::vector{q.class_id} : q.ids;
      auto resolved = execute_query(graph_, q);
      reply = turn(next, resolved, {});
      if (finished(reply, next)) return;
      if (s_.iteration >= config_.iteration_cap) {
        s_.stop_reason = StopReason::iteration_cap;
        return;
      }
    }
  }

 private:
  static void append(std::vector<std::string>& to, const std::vector<std::string>& from) {
    to.insert(to.end(), from.begin(), from.end());
  }

  // Renders the resolved nodes, sends the feedback and returns the reply.
  std::string turn(TraceRecord& rec, const Resolution& res, const std::string& preamble) {
    append(s_.warnings, res.warnings);
    std::string info;
    for (const auto& node : res.nodes) {
      rec.resolved.push_back(node.id);
      auto structure = get_node_structure(graph_, node.id);
      if (!info.empty()) info += "\n";
      info += structure;
      if (s_.retrieved_ids.insert(node.id).second) {
        ++rec.new_nodes;
        s_.node_dict.push_back({node, rec.iteration, std::move(structure)});
      }
    }
    if (res.nodes.empty()) info = std::string(kNoInstanceFound);
    rec.info_chars = info.size();

    auto message = fill_template(prompts_.step3_feedback, {{"retrieved_info", info}});
    if (!preamble.empty()) message = preamble + "\n\n" + message;
    s_.trace.push_back(rec);
    return llm_response(client_, message, "", s_.history);
  }

  bool finished(const std::string& reply, const TraceRecord& rec) {
    if (reply.find(kStopToken) != std::string::npos) {
      s_.stop_reason = StopReason::llm_stop;
      return true;
    }
    if (rec.new_nodes == 0) {
      s_.stop_reason = StopReason::no_new_info;
      return true;
    }
    return false;
  }

  const KnowledgeGraph& graph_;
  LlmClient& client_;
  const TraversalConfig& config_;
  const PromptCatalog& prompts_;
  RetrievalSession& s_;
};

}  // namespace

RetrievalSession ontology_based_retrieval(const KnowledgeGraph& graph, std::string_view query,
                                          LlmClient& client, const TraversalConfig& config,
                                          const PromptCatalog& prompts) {
  if (config.iteration_cap < 1) throw std::invalid_argument("iteration_cap must be at least 1");
  RetrievalSession session;
  session.query = std::string(query);
  try {
    Search(graph, client, config, prompts, session).run();
  } catch (const LlmError& e) {
    session.stop_reason = StopReason::backend_failure;
    session.failure = std::string(failure_kind(e)) + ": " + e.what();
  }
  return session;
}

RetrievalSession ontology_based_retrieval(const KnowledgeGraph& graph, std::string_view query,
                                          const BackendConfig& backend, const TraversalConfig& config,
                                          const PromptCatalog& prompts) {
  auto client = make_client(backend);
  return ontology_based_retrieval(graph, query, *client, config, prompts);
}

std::string render_trace(const RetrievalSession& session) {
  auto list = [](const std::vector<std::string>& ids) { return "[" + join(ids, ", ") + "]"; };
  std::string out = "query: " + session.query + "\n";
  out += "classes: " + list(session.classes) + "\n";
  out += "start nodes: " + list(session.start_nodes) + "\n";
  for (const auto& rec : session.trace) {
    out += "iteration " + std::to_string(rec.iteration);
    if (rec.iteration == 0) out += " (setup)";
    out += ": " + rec.query_kind + " requested " + list(rec.requested) + " resolved " + list(rec.resolved) +
           " new " + std::to_string(rec.new_nodes) + " info " + std::to_string(rec.info_chars) + " chars\n";
  }
  out += "node_dict: " + list(session.node_ids()) + "\n";
  out += "stop: ";
  out += session.stop_reason ? stop_reason_name(*session.stop_reason) : std::string_view("running");
  out += " after " + std::to_string(session.iteration) + " expansion iteration" +
         (session.iteration == 1 ? "" : "s") + "\n";
  if (!session.failure.empty()) out += "failure: " + session.failure + "\n";
  for (const auto& w : session.warnings) out += "warning: " + w + "\n";
  return out;
}

}  // namespace kgrag
