#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kgrag {

/// Every prompt the engine sends. Slots are written `{name}` and filled in a
/// single pass, so substituted text is never re-expanded; braces that do not
/// name a known slot are kept literally.
///
/// Slots per template:
///   step1.system    {ontology_structure}
///   step1.user      {query}
///   step1.fallback  {query} {class_list}
///   step2.user      {query} {classes} {instances}
///   step3.setup     {query}
///   step3.feedback  {retrieved_info}
///   answer.prompt   {query} {context} {style}
struct PromptCatalog {
  std::string version;
  std::string step1_system;
  std::string step1_user;
  std::string step1_fallback;
  std::string step2_user;
  std::string step3_setup;
  std::string step3_feedback;
  std::string answer_system;
  std::string answer_prompt;
  std::string answer_worker;
  std::string answer_developer;
  std::string answer_none;
  std::string answer_no_result;

  static PromptCatalog defaults();

  /// Reads a JSON object keyed by step name ("step1.system", ...). Missing
  /// keys keep their default; unknown keys are rejected.
  static PromptCatalog parse(std::string_view document);
  static PromptCatalog load_file(const std::string& path);

  std::string to_json() const;

  /// Throws std::invalid_argument if step3.feedback lacks `<STOP>` or the
  /// {retrieved_info} slot.
  void validate() const;

  friend bool operator==(const PromptCatalog&, const PromptCatalog&) = default;
};

using Slots = std::vector<std::pair<std::string_view, std::string_view>>;

std::string fill_template(std::string_view tmpl, const Slots& slots);

inline constexpr std::string_view kStopToken = "<STOP>";
inline constexpr std::string_view kNoInstanceFound = "No instance found";

}  // namespace kgrag
