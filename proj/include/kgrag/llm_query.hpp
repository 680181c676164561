#pragma once

#include <string>
#include <vector>

namespace kgrag {

/// What the LLM asked for in one traversal turn.
///
/// Grammar of an assistant reply:
///   - any text containing `<STOP>`            -> stop
///   - a JSON list of id strings               -> node_request
///   - a JSON object {"instances_of": "Class"} -> class_instances_request
///   - anything else                           -> malformed
struct LlmQuery {
  enum class Kind { node_request, class_instances_request, stop, malformed };

  Kind kind = Kind::malformed;
  std::vector<std::string> ids;
  std::string class_id;

  static LlmQuery stop() { return {Kind::stop, {}, {}}; }
  static LlmQuery malformed() { return {Kind::malformed, {}, {}}; }
  static LlmQuery nodes(std::vector<std::string> ids) {
    return {Kind::node_request, std::move(ids), {}};
  }
  static LlmQuery instances_of(std::string class_id) {
    return {Kind::class_instances_request, {}, std::move(class_id)};
  }

  friend bool operator==(const LlmQuery&, const LlmQuery&) = default;
};

}  // namespace kgrag
