#include "kgrag/kg_store.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace kgrag {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string literal_to_string(const Literal& value) {
  if (const auto* text = std::get_if<std::string>(&value)) {
    return *text;
  }
  const double number = std::get<double>(value);
  if (std::isfinite(number) && std::trunc(number) == number && std::fabs(number) < 1e15) {
    return std::to_string(static_cast<long long>(number));
  }
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), number);
  return std::string(buf.data(), end);
}

// ---------------------------------------------------------------------------
// KnowledgeGraph

const ClassDef* KnowledgeGraph::find_class(std::string_view id) const {
  auto it = class_index_.find(std::string(id));
  return it == class_index_.end() ? nullptr : &classes_[it->second];
}

const Instance* KnowledgeGraph::find_instance(std::string_view id) const {
  auto it = instance_index_.find(std::string(id));
  return it == instance_index_.end() ? nullptr : &instances_[it->second];
}

bool KnowledgeGraph::contains(std::string_view id) const {
  return find_class(id) != nullptr || find_instance(id) != nullptr;
}

std::vector<std::string> KnowledgeGraph::node_ids() const {
  std::vector<std::string> ids;
  ids.reserve(node_count());
  for (const auto& c : classes_) ids.push_back(c.id);
  for (const auto& i : instances_) ids.push_back(i.id);
  return ids;
}

std::vector<const Edge*> KnowledgeGraph::outgoing(std::string_view id) const {
  std::vector<const Edge*> out;
  if (auto it = out_index_.find(std::string(id)); it != out_index_.end()) {
    for (auto idx : it->second) out.push_back(&edges_[idx]);
  }
  return out;
}

std::vector<const Edge*> KnowledgeGraph::incoming(std::string_view id) const {
  std::vector<const Edge*> in;
  if (auto it = in_index_.find(std::string(id)); it != in_index_.end()) {
    for (auto idx : it->second) in.push_back(&edges_[idx]);
  }
  return in;
}

std::vector<const Instance*> KnowledgeGraph::instances_of(std::string_view class_id) const {
  std::vector<const Instance*> out;
  for (const auto& inst : instances_) {
    if (std::find(inst.types.begin(), inst.types.end(), class_id) != inst.types.end()) {
      out.push_back(&inst);
    }
  }
  return out;
}

bool KnowledgeGraph::same_content(const KnowledgeGraph& other) const {
  auto sorted = [](auto items, auto key) {
    std::sort(items.begin(), items.end(),
              [&](const auto& a, const auto& b) { return key(a) < key(b); });
    return items;
  };
  auto by_self = [](const auto& x) -> const auto& { return x; };
  auto by_id = [](const Instance& x) -> const std::string& { return x.id; };
  auto norm_types = [](std::vector<Instance> items) {
    for (auto& i : items) std::sort(i.types.begin(), i.types.end());
    return items;
  };
  return sorted(classes_, by_self) == sorted(other.classes_, by_self) &&
         sorted(norm_types(instances_), by_id) == sorted(norm_types(other.instances_), by_id) &&
         sorted(edges_, by_self) == sorted(other.edges_, by_self) &&
         sorted(schema_, by_self) == sorted(other.schema_, by_self);
}

// ---------------------------------------------------------------------------
// GraphBuilder

GraphBuilder& GraphBuilder::add_class(ClassDef def) {
  graph_.classes_.push_back(std::move(def));
  return *this;
}

GraphBuilder& GraphBuilder::add_instance(Instance inst) {
  graph_.instances_.push_back(std::move(inst));
  return *this;
}

GraphBuilder& GraphBuilder::add_edge(Edge edge) {
  graph_.edges_.push_back(std::move(edge));
  return *this;
}

GraphBuilder& GraphBuilder::add_relation(RelationSchema rel) {
  graph_.schema_.push_back(std::move(rel));
  return *this;
}

namespace {

std::string triple_text(std::string_view s, std::string_view p, std::string_view o) {
  return "(" + std::string(s) + ", " + std::string(p) + ", " + std::string(o) + ")";
}

}  // namespace

KnowledgeGraph GraphBuilder::freeze() && {
  KnowledgeGraph g = std::move(graph_);
  graph_ = KnowledgeGraph{};

  for (std::size_t i = 0; i < g.classes_.size(); ++i) {
    const auto& c = g.classes_[i];
    if (c.id.empty()) throw GraphError("class with empty id");
    if (!g.class_index_.emplace(c.id, i).second) {
      throw DuplicateNodeError("duplicate class id: " + c.id);
    }
  }
  for (std::size_t i = 0; i < g.instances_.size(); ++i) {
    const auto& inst = g.instances_[i];
    if (inst.id.empty()) throw GraphError("instance with empty id");
    if (g.class_index_.count(inst.id) != 0) {
      throw DuplicateNodeError("instance id collides with class id: " + inst.id);
    }
    if (!g.instance_index_.emplace(inst.id, i).second) {
      throw DuplicateNodeError("duplicate instance id: " + inst.id);
    }
    if (inst.types.empty()) throw GraphError("instance without type: " + inst.id);
    std::unordered_set<std::string> seen;
    for (const auto& t : inst.types) {
      if (g.class_index_.count(t) == 0) {
        throw GraphIntegrityError("instance " + inst.id + " has unknown type " + t);
      }
      if (!seen.insert(t).second) {
        throw GraphError("instance " + inst.id + " lists type " + t + " twice");
      }
    }
  }

  std::set<Edge> unique_edges;
  for (std::size_t i = 0; i < g.edges_.size(); ++i) {
    const auto& e = g.edges_[i];
    const auto triple = triple_text(e.subject, e.predicate, e.object);
    if (e.predicate.empty()) throw GraphError("edge with empty predicate " + triple);
    if (!g.contains(e.subject)) {
      throw GraphIntegrityError("dangling subject " + e.subject + " in edge " + triple);
    }
    if (!g.contains(e.object)) {
      throw GraphIntegrityError("dangling object " + e.object + " in edge " + triple);
    }
    if (!unique_edges.insert(e).second) {
      throw GraphIntegrityError("duplicate edge " + triple);
    }
    g.out_index_[e.subject].push_back(i);
    g.in_index_[e.object].push_back(i);
  }

  std::set<RelationSchema> unique_schema;
  for (const auto& r : g.schema_) {
    const auto triple = triple_text(r.domain, r.predicate, r.range);
    if (g.find_class(r.domain) == nullptr) {
      throw GraphIntegrityError("relation schema domain " + r.domain + " is not a class in " + triple);
    }
    if (g.find_class(r.range) == nullptr) {
      throw GraphIntegrityError("relation schema range " + r.range + " is not a class in " + triple);
    }
    if (!unique_schema.insert(r).second) {
      throw GraphIntegrityError("duplicate relation schema entry " + triple);
    }
  }

  for (auto& [id, list] : g.out_index_) {
    std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
      const auto& ea = g.edges_[a];
      const auto& eb = g.edges_[b];
      return std::tie(ea.predicate, ea.object) < std::tie(eb.predicate, eb.object);
    });
  }
  for (auto& [id, list] : g.in_index_) {
    std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
      const auto& ea = g.edges_[a];
      const auto& eb = g.edges_[b];
      return std::tie(ea.predicate, ea.subject) < std::tie(eb.predicate, eb.subject);
    });
  }
  return g;
}

// ---------------------------------------------------------------------------
// Document format

namespace {

const json& require_string(const json& obj, const char* key, std::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw GraphParseError(std::string(where) + ": missing string field '" + key + "'");
  }
  return *it;
}

const json& list_field(const json& doc, const char* key) {
  static const json empty = json::array();
  auto it = doc.find(key);
  if (it == doc.end()) return empty;
  if (!it->is_array()) throw GraphParseError(std::string("'") + key + "' must be a list");
  return *it;
}

}  // namespace

KnowledgeGraph load_graph(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw GraphParseError(std::string("malformed KG document: ") + e.what());
  }
  if (!doc.is_object()) throw GraphParseError("KG document must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "classes" && key != "instances" && key != "edges" && key != "relation_schema") {
      throw GraphParseError("unknown top-level key '" + key + "'");
    }
  }

  GraphBuilder builder;
  for (const auto& c : list_field(doc, "classes")) {
    if (!c.is_object()) throw GraphParseError("class entry must be an object");
    ClassDef def;
    def.id = require_string(c, "id", "class").get<std::string>();
    def.label = c.contains("label") ? require_string(c, "label", "class").get<std::string>() : def.id;
    // May be empty, but must be written out.
    def.description = require_string(c, "description", "class " + def.id).get<std::string>();
    builder.add_class(std::move(def));
  }
  for (const auto& i : list_field(doc, "instances")) {
    if (!i.is_object()) throw GraphParseError("instance entry must be an object");
    Instance inst;
    inst.id = require_string(i, "id", "instance").get<std::string>();
    auto types = i.find("types");
    if (types == i.end() || !types->is_array()) {
      throw GraphParseError("instance " + inst.id + ": 'types' must be a list");
    }
    for (const auto& t : *types) {
      if (!t.is_string()) throw GraphParseError("instance " + inst.id + ": type must be a string");
      inst.types.push_back(t.get<std::string>());
    }
    if (auto props = i.find("properties"); props != i.end()) {
      if (!props->is_object()) {
        throw GraphParseError("instance " + inst.id + ": 'properties' must be an object");
      }
      for (const auto& [name, value] : props->items()) {
        if (value.is_string()) {
          inst.properties.emplace(name, value.get<std::string>());
        } else if (value.is_number()) {
          inst.properties.emplace(name, value.get<double>());
        } else {
          throw GraphParseError("instance " + inst.id + ": property '" + name +
                                "' must be text or a number");
        }
      }
    }
    builder.add_instance(std::move(inst));
  }
  for (const auto& e : list_field(doc, "edges")) {
    if (!e.is_object()) throw GraphParseError("edge entry must be an object");
    builder.add_edge({require_string(e, "subject", "edge").get<std::string>(),
                      require_string(e, "predicate", "edge").get<std::string>(),
                      require_string(e, "object", "edge").get<std::string>()});
  }
  for (const auto& r : list_field(doc, "relation_schema")) {
    if (!r.is_object()) throw GraphParseError("relation_schema entry must be an object");
    builder.add_relation({require_string(r, "domain", "relation_schema").get<std::string>(),
                          require_string(r, "predicate", "relation_schema").get<std::string>(),
                          require_string(r, "range", "relation_schema").get<std::string>()});
  }
  return std::move(builder).freeze();
}

KnowledgeGraph load_graph_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GraphError("cannot open KG document: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_graph(buf.str());
}

std::string dump_graph(const KnowledgeGraph& graph) {
  ordered_json doc;
  doc["classes"] = ordered_json::array();
  for (const auto& c : graph.classes()) {
    doc["classes"].push_back({{"id", c.id}, {"label", c.label}, {"description", c.description}});
  }
  doc["instances"] = ordered_json::array();
  for (const auto& i : graph.instances()) {
    ordered_json props = ordered_json::object();
    for (const auto& [name, value] : i.properties) {
      if (const auto* text = std::get_if<std::string>(&value)) {
        props[name] = *text;
      } else {
        props[name] = std::get<double>(value);
      }
    }
    doc["instances"].push_back({{"id", i.id}, {"types", i.types}, {"properties", props}});
  }
  doc["edges"] = ordered_json::array();
  for (const auto& e : graph.edges()) {
    doc["edges"].push_back({{"subject", e.subject}, {"predicate", e.predicate}, {"object", e.object}});
  }
  doc["relation_schema"] = ordered_json::array();
  for (const auto& r : graph.relation_schema()) {
    doc["relation_schema"].push_back({{"domain", r.domain}, {"predicate", r.predicate}, {"range", r.range}});
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Lookup and rendering

std::string normalize_id(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char ch : raw) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

namespace {

Node make_node(const KnowledgeGraph& graph, std::string_view id) {
  if (const auto* c = graph.find_class(id)) {
    return {c->id, NodeKind::ontology_class, c->label};
  }
  const auto* inst = graph.find_instance(id);
  std::string label;
  if (auto it = inst->properties.find("label"); it != inst->properties.end()) {
    label = literal_to_string(it->second);
  }
  return {inst->id, NodeKind::instance, std::move(label)};
}

// Keeps multi-line literals on one rendered line.
std::string one_line(std::string_view text) {
  std::string out;
  for (char ch : text) {
    if (ch == '\n') {
      out += "\\n";
    } else if (ch != '\r') {
      out.push_back(ch);
    }
  }
  return out;
}

}  // namespace

NodeLookup get_nodes(const KnowledgeGraph& graph, const std::vector<std::string>& ids) {
  NodeLookup result;
  for (const auto& raw : ids) {
    const auto id = normalize_id(raw);
    if (graph.contains(id)) {
      result.found.emplace(id, make_node(graph, id));
    } else {
      result.warnings.push_back("unknown node id: " + id);
    }
  }
  return result;
}

std::string get_node_structure(const KnowledgeGraph& graph, std::string_view id) {
  std::string out = "id: " + std::string(id) + "\n";
  if (const auto* c = graph.find_class(id)) {
    out += "kind: class\n";
    if (!c->label.empty() && c->label != c->id) out += "label: " + one_line(c->label) + "\n";
    if (!c->description.empty()) out += "description: " + one_line(c->description) + "\n";
  } else if (const auto* inst = graph.find_instance(id)) {
    for (const auto& t : inst->types) out += "type: " + t + "\n";
    for (const auto& [name, value] : inst->properties) {
      out += "property " + name + ": " + one_line(literal_to_string(value)) + "\n";
    }
  } else {
    throw std::out_of_range("unknown node id: " + std::string(id));
  }
  for (const auto* e : graph.outgoing(id)) {
    out += "out: " + e->predicate + " -> " + e->object + "\n";
  }
  for (const auto* e : graph.incoming(id)) {
    out += "in: " + e->predicate + " <- " + e->subject + "\n";
  }
  return out;
}

std::string class_schema_summary(const KnowledgeGraph& graph) {
  if (graph.classes().empty()) return std::string(kEmptySchemaText);

  std::string out = "classes:\n";
  for (const auto& c : graph.classes()) {
    out += "- " + c.id;
    if (!c.label.empty() && c.label != c.id) out += " (" + one_line(c.label) + ")";
    if (!c.description.empty()) out += ": " + one_line(c.description);
    out += "\n";
  }
  out += "relations:\n";
  for (const auto& r : graph.relation_schema()) {
    out += "- " + r.domain + " " + r.predicate + " " + r.range + "\n";
  }
  if (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

Resolution execute_query(const KnowledgeGraph& graph, const LlmQuery& query) {
  Resolution result;
  std::unordered_set<std::string> seen;
  auto add = [&](const std::string& id) {
    if (seen.insert(id).second) result.nodes.push_back(make_node(graph, id));
  };

  switch (query.kind) {
    case LlmQuery::Kind::node_request:
      for (const auto& raw : query.ids) {
        const auto id = normalize_id(raw);
        if (graph.contains(id)) {
          add(id);
        } else {
          result.warnings.push_back("unknown node id: " + id);
        }
      }
      break;
    case LlmQuery::Kind::class_instances_request: {
      const auto class_id = normalize_id(query.class_id);
      if (graph.find_class(class_id) == nullptr) {
        result.warnings.push_back("unknown class id: " + class_id);
        break;
      }
      for (const auto* inst : graph.instances_of(class_id)) add(inst->id);
      break;
    }
    case LlmQuery::Kind::stop:
    case LlmQuery::Kind::malformed:
      break;
  }
  return result;
}

}  // namespace kgrag
