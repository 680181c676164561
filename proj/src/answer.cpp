#include "kgrag/answer.hpp"

#include <stdexcept>

namespace kgrag {

std::string_view role_profile_name(RoleProfile role) {
  switch (role) {
    case RoleProfile::none:
      return "none";
    case RoleProfile::worker:
      return "worker";
    case RoleProfile::developer:
      return "developer";
  }
  return "none";
}

RoleProfile parse_role_profile(std::string_view name) {
  if (name == "none" || name.empty()) return RoleProfile::none;
  if (name == "worker") return RoleProfile::worker;
  if (name == "developer") return RoleProfile::developer;
  throw std::invalid_argument("unknown role profile: " + std::string(name));
}

namespace {

const std::string& style_for(RoleProfile role, const PromptCatalog& prompts) {
  switch (role) {
    case RoleProfile::worker:
      return prompts.answer_worker;
    case RoleProfile::developer:
      return prompts.answer_developer;
    case RoleProfile::none:
      break;
  }
  return prompts.answer_none;
}

}  // namespace

std::string build_answer_prompt(const RetrievalSession& session, RoleProfile role,
                                const PromptCatalog& prompts) {
  // node_dict is append-only, so its order is already first-retrieval order.
  std::string context;
  for (const auto& n : session.node_dict) {
    if (!context.empty()) context += "\n";
    context += n.structure;
  }
  if (context.empty()) context = std::string(kNoInstanceFound);
  return fill_template(prompts.answer_prompt,
                       {{"query", session.query}, {"context", context}, {"style", style_for(role, prompts)}});
}

Explanation compose_answer(const RetrievalSession& session, RoleProfile role, LlmClient& client,
                           const PromptCatalog& prompts) {
  if (!session.stop_reason) throw std::logic_error("compose_answer needs a terminated session");
  Explanation ex;
  ex.role_profile = role;
  ex.session = &session;
  if (*session.stop_reason == StopReason::no_result) {
    ex.answer = prompts.answer_no_result;
    return ex;
  }
  ChatHistory fresh;
  ex.answer = llm_response(client, build_answer_prompt(session, role, prompts), prompts.answer_system, fresh);
  ex.cited_node_ids = extract_cited_nodes(ex.answer, session.node_dict);
  return ex;
}

std::vector<std::string> extract_cited_nodes(std::string_view answer,
                                             const std::vector<RetrievedNode>& node_dict) {
  std::vector<std::string> cited;
  if (answer.empty()) return cited;
  for (const auto& n : node_dict) {
    const bool by_id = answer.find(n.node.id) != std::string_view::npos;
    const bool by_label = !n.node.label.empty() && answer.find(n.node.label) != std::string_view::npos;
    if (by_id || by_label) cited.push_back(n.node.id);
  }
  return cited;
}

}  // namespace kgrag
