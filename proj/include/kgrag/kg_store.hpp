#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "kgrag/llm_query.hpp"

namespace kgrag {

/// Base class for every error raised while loading or building a graph.
class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The document is not valid JSON or does not follow the KG layout.
class GraphParseError : public GraphError {
 public:
  using GraphError::GraphError;
};

/// An edge or schema entry points at a node that does not exist, or a
/// triple is repeated.
class GraphIntegrityError : public GraphError {
 public:
  using GraphError::GraphError;
};

/// Two nodes share an id (class/class, instance/instance or class/instance).
class DuplicateNodeError : public GraphError {
 public:
  using GraphError::GraphError;
};

/// Literal property values are either text or numbers.
using Literal = std::variant<std::string, double>;

std::string literal_to_string(const Literal& value);

struct ClassDef {
  std::string id;
  std::string label;
  std::string description;

  friend bool operator==(const ClassDef&, const ClassDef&) = default;
  friend auto operator<=>(const ClassDef&, const ClassDef&) = default;
};

struct Instance {
  std::string id;
  std::vector<std::string> types;
  std::map<std::string, Literal> properties;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct Edge {
  std::string subject;
  std::string predicate;
  std::string object;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct RelationSchema {
  std::string domain;
  std::string predicate;
  std::string range;

  friend bool operator==(const RelationSchema&, const RelationSchema&) = default;
  friend auto operator<=>(const RelationSchema&, const RelationSchema&) = default;
};

enum class NodeKind { ontology_class, instance };

/// Lightweight value copy of a resolved node, as kept in a retrieval
/// session's node dictionary.
struct Node {
  std::string id;
  NodeKind kind = NodeKind::instance;
  std::string label;

  friend bool operator==(const Node&, const Node&) = default;
};

/// Result of a tolerant id lookup. Unknown ids never raise; they are
/// reported in `warnings` instead.
struct NodeLookup {
  std::map<std::string, Node> found;
  std::vector<std::string> warnings;
};

/// Ordered resolution of an LLM query (request order, duplicates removed).
struct Resolution {
  std::vector<Node> nodes;
  std::vector<std::string> warnings;
};

class GraphBuilder;

/// Frozen, immutable knowledge graph. Instances are only produced by
/// GraphBuilder::freeze (or default-constructed empty), so every live
/// KnowledgeGraph satisfies referential integrity. Safe for concurrent
/// readers.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  const std::vector<ClassDef>& classes() const { return classes_; }
  const std::vector<Instance>& instances() const { return instances_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<RelationSchema>& relation_schema() const { return schema_; }

  const ClassDef* find_class(std::string_view id) const;
  const Instance* find_instance(std::string_view id) const;
  bool contains(std::string_view id) const;
  std::size_t node_count() const { return classes_.size() + instances_.size(); }

  /// All node ids, classes first, each group in document order.
  std::vector<std::string> node_ids() const;

  /// Edges leaving `id`, sorted by (predicate, object).
  std::vector<const Edge*> outgoing(std::string_view id) const;
  /// Edges entering `id`, sorted by (predicate, subject).
  std::vector<const Edge*> incoming(std::string_view id) const;

  /// Instances typed by `class_id`, in document order.
  std::vector<const Instance*> instances_of(std::string_view class_id) const;

  /// Set equality over classes, instances, edges and relation schema.
  bool same_content(const KnowledgeGraph& other) const;

 private:
  friend class GraphBuilder;

  std::vector<ClassDef> classes_;
  std::vector<Instance> instances_;
  std::vector<Edge> edges_;
  std::vector<RelationSchema> schema_;

  std::unordered_map<std::string, std::size_t> class_index_;
  std::unordered_map<std::string, std::size_t> instance_index_;
  std::unordered_map<std::string, std::vector<std::size_t>> out_index_;
  std::unordered_map<std::string, std::vector<std::size_t>> in_index_;
};

/// Collects graph content and validates it once, in freeze().
class GraphBuilder {
 public:
  GraphBuilder& add_class(ClassDef def);
  GraphBuilder& add_instance(Instance inst);
  GraphBuilder& add_edge(Edge edge);
  GraphBuilder& add_relation(RelationSchema rel);

  /// Validates every invariant and returns the frozen graph.
  /// Throws DuplicateNodeError, GraphIntegrityError or GraphError.
  KnowledgeGraph freeze() &&;

 private:
  KnowledgeGraph graph_;
};

/// Parses a KG document (JSON with `classes`, `instances`, `edges`,
/// `relation_schema`).
KnowledgeGraph load_graph(std::string_view document);
KnowledgeGraph load_graph_file(const std::string& path);

/// Serializes to the KG document format. Output is deterministic and
/// load_graph(dump_graph(g)) has the same content as g.
std::string dump_graph(const KnowledgeGraph& graph);

/// Trims and collapses internal whitespace runs to a single space.
std::string normalize_id(std::string_view raw);

NodeLookup get_nodes(const KnowledgeGraph& graph, const std::vector<std::string>& ids);

/// Deterministic text rendering of one node and its neighborhood:
///   id line, type lines (or class marker), properties by name,
///   outgoing edges by (predicate, object), incoming by (predicate, subject).
/// Throws std::out_of_range for an unknown id.
std::string get_node_structure(const KnowledgeGraph& graph, std::string_view id);

/// Class level of the ontology: every class with its description and every
/// relation-schema triple. Never mentions instance ids.
std::string class_schema_summary(const KnowledgeGraph& graph);

inline constexpr std::string_view kEmptySchemaText = "(empty ontology)";

/// Resolves a node request or a class-instances request. Stop and malformed
/// queries resolve to nothing.
Resolution execute_query(const KnowledgeGraph& graph, const LlmQuery& query);

}  // namespace kgrag
