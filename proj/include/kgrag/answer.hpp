#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "kgrag/llm_gateway.hpp"
#include "kgrag/prompts.hpp"
#include "kgrag/traversal.hpp"

namespace kgrag {

enum class RoleProfile { none, worker, developer };

std::string_view role_profile_name(RoleProfile role);
RoleProfile parse_role_profile(std::string_view name);

struct Explanation {
  std::string answer;
  std::vector<std::string> cited_node_ids;
  RoleProfile role_profile = RoleProfile::none;
  const RetrievalSession* session = nullptr;
};

/// Final-answer prompt for a terminated session: query, node structures in
/// first-retrieval order, then the role's style guidance.
std::string build_answer_prompt(const RetrievalSession& session, RoleProfile role,
                                const PromptCatalog& prompts = PromptCatalog::defaults());

/// One fresh-context LLM call over the collected nodes. A no_result session
/// returns the fixed no-result text without contacting the backend.
Explanation compose_answer(const RetrievalSession& session, RoleProfile role, LlmClient& client,
                           const PromptCatalog& prompts = PromptCatalog::defaults());

/// Ids from `node_dict` whose id or label occurs in `answer`, in node_dict order.
std::vector<std::string> extract_cited_nodes(std::string_view answer,
                                             const std::vector<RetrievedNode>& node_dict);

}  // namespace kgrag
