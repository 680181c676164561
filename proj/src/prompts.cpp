#include "kgrag/prompts.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace kgrag {

using ordered_json = nlohmann::ordered_json;

namespace {

struct Field {
  const char* key;
  std::string PromptCatalog::*member;
};

constexpr Field kFields[] = {
    {"version", &PromptCatalog::version},
    {"step1.system", &PromptCatalog::step1_system},
    {"step1.user", &PromptCatalog::step1_user},
    {"step1.fallback", &PromptCatalog::step1_fallback},
    {"step2.user", &PromptCatalog::step2_user},
    {"step3.setup", &PromptCatalog::step3_setup},
    {"step3.feedback", &PromptCatalog::step3_feedback},
    {"answer.system", &PromptCatalog::answer_system},
    {"answer.prompt", &PromptCatalog::answer_prompt},
    {"answer.worker", &PromptCatalog::answer_worker},
    {"answer.developer", &PromptCatalog::answer_developer},
    {"answer.none", &PromptCatalog::answer_none},
    {"answer.no_result", &PromptCatalog::answer_no_result},
};

}  // namespace

PromptCatalog PromptCatalog::defaults() {
  PromptCatalog p;
  p.version = "1";

  // Class-identification prompts, verbatim.
  p.step1_system =
      "The following structure illustrates the class level of the ontology, which will be used "
      "to answer the subsequent questions. The node classes have instances that are not listed "
      "here: {ontology_structure}.";
  p.step1_user =
      "Only give as an answer a list of classes (following this syntax:\n"
      "[class1, class2, ...]) which are relevant for this user query {query}\n"
      "Return only JSON syntax without prefix.";

  p.step1_fallback =
      "No class was selected. The ontology defines these classes: {class_list}. Name the classes "
      "that come closest to the user query {query}, even if the match is only partial, as a JSON "
      "list such as [\"ClassA\"]. Return only JSON syntax without prefix.";
  p.step2_user =
      "Selected classes: {classes}. Their instances are: {instances}. Only give as an answer a "
      "list of instances (following this syntax: [instance1, instance2, ...]) which best match "
      "the user query {query} and serve as starting points for the search. Return only JSON "
      "syntax without prefix.";
  p.step3_setup =
      "We now search the knowledge graph to answer the user query {query}. Each node is shown as "
      "lines: 'id: <node id>', 'type: <class>' for instances or 'kind: class' for classes, "
      "'property <name>: <value>', 'out: <predicate> -> <target>' and "
      "'in: <predicate> <- <source>'. You can ask for more nodes in two ways: a JSON list of node "
      "ids such as [\"node_a\", \"node_b\"], or all instances of a class as "
      "{\"instances_of\": \"ClassName\"}. Only ids that appear in results exist. Follow the edges "
      "that matter for the query and stop as soon as the collected information is sufficient. "
      "The start nodes are listed below.";
  p.step3_feedback =
      "Result to your query: {retrieved_info}. If you need more information, use another query, "
      "otherwise write <STOP>. Return JSON without prefix.";

  p.answer_system =
      "You explain machine learning models, datasets and tasks of a manufacturing knowledge "
      "graph. Ground every statement in the provided knowledge graph context and say so when the "
      "context does not contain the answer.";
  p.answer_prompt =
      "User query: {query}\n\nKnowledge graph context:\n{context}\n\nAnswer guidance: {style}";
  p.answer_worker =
      "The reader is a shop-floor worker. Begin with a concise summary of one or two sentences, "
      "then add optional details. Use plain terms and explain every technical term you need.";
  p.answer_developer =
      "The reader is an ML developer. Begin with a concise summary, then give technical detail: "
      "model identifiers, algorithms, datasets, preprocessing and explanation methods.";
  p.answer_none = "Begin with a concise summary, then give the supporting details.";
  p.answer_no_result = "The knowledge graph contains no information relevant to this question.";
  return p;
}

PromptCatalog PromptCatalog::parse(std::string_view document) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(document.begin(), document.end());
  } catch (const ordered_json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed prompt file: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("prompt file must be an object");

  auto catalog = defaults();
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const auto& f : kFields) {
      if (key == f.key) {
        if (!value.is_string()) throw std::invalid_argument("prompt '" + key + "' must be a string");
        catalog.*f.member = value.get<std::string>();
        known = true;
        break;
      }
    }
    if (!known) throw std::invalid_argument("unknown prompt key '" + key + "'");
  }
  catalog.validate();
  return catalog;
}

PromptCatalog PromptCatalog::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open prompt file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string PromptCatalog::to_json() const {
  ordered_json doc;
  for (const auto& f : kFields) doc[f.key] = this->*f.member;
  return doc.dump(2) + "\n";
}

void PromptCatalog::validate() const {
  if (step3_feedback.find(kStopToken) == std::string::npos) {
    throw std::invalid_argument("step3.feedback must contain the literal <STOP>");
  }
  if (step3_feedback.find("{retrieved_info}") == std::string::npos) {
    throw std::invalid_argument("step3.feedback must contain the {retrieved_info} slot");
  }
}

std::string fill_template(std::string_view tmpl, const Slots& slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(open));
      break;
    }
    const auto name = tmpl.substr(open + 1, close - open - 1);
    bool replaced = false;
    for (const auto& [slot, value] : slots) {
      if (slot == name) {
        out.append(value);
        replaced = true;
        break;
      }
    }
    if (replaced) {
      pos = close + 1;
    } else {
      out.push_back('{');
      pos = open + 1;
    }
  }
  return out;
}

}  // namespace kgrag
