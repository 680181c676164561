#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "kgrag/answer.hpp"
#include "kgrag/kg_store.hpp"
#include "kgrag/llm_gateway.hpp"
#include "kgrag/traversal.hpp"

namespace kgrag {

enum class Category {
  standard,
  ambiguity,
  contradictions,
  out_of_scope,
  overgeneralization_bias,
  instructional_confusion,
  complex_cross_referencing,
  prompt_injection,
};

std::string_view category_name(Category c);
Category parse_category(std::string_view name);
bool is_robustness(Category c);

struct QuestionItem {
  std::string id;
  std::string text;
  Category category = Category::standard;
  std::string expected;
  RoleProfile role = RoleProfile::none;

  friend bool operator==(const QuestionItem&, const QuestionItem&) = default;
};

/// JSON list of {id, text, category, expected, role}. Ids must be unique and
/// robustness items need a non-empty expected pattern.
std::vector<QuestionItem> parse_question_bank(std::string_view document);
std::vector<QuestionItem> load_question_bank(const std::string& path);

/// One recorded run of one question.
struct Transcript {
  QuestionItem question;
  std::vector<TraceRecord> trace;
  StopReason stop_reason = StopReason::no_result;
  int iterations = 0;
  std::string answer;
  std::vector<std::string> cited_node_ids;
  std::vector<std::string> notes;
  std::string error;
  double wall_time_ms = 0;

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

/// Text blocks with `#Question`, `#Expected`, `#Answer` and `#Notes`
/// sections, plus metadata sections so that parse_transcripts inverts
/// render_transcripts exactly. Content lines starting with `#` or `\` are
/// escaped with a leading `\`.
std::string render_transcripts(const std::vector<Transcript>& transcripts);
std::vector<Transcript> parse_transcripts(std::string_view text);

struct EvalConfig {
  TraversalConfig traversal;
  PromptCatalog prompts = PromptCatalog::defaults();
};

/// Runs each question in a fresh session (new client per question). A
/// failing question is recorded in its transcript and the run continues.
/// When `sink` is given, each transcript is written to it as it completes.
std::vector<Transcript> run_question_bank(const std::vector<QuestionItem>& bank, const KnowledgeGraph& graph,
                                          const BackendConfig& backend, const EvalConfig& config = {},
                                          std::ostream* sink = nullptr);

}  // namespace kgrag
