// Helpers shared by the unit tests and the acceptance binary.
#pragma once

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kgrag/kg_store.hpp"
#include "kgrag/llm_gateway.hpp"

namespace kgrag::fx {

inline std::string fixture_path(const std::string& name) { return std::string(KGRAG_FIXTURE_DIR) + "/" + name; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Class C plus instances n0 -> n1 -> ... -> n{len-1} linked by `next`.
inline KnowledgeGraph chain_graph(int len) {
  GraphBuilder b;
  b.add_class({"C", "C", "Chain element."});
  b.add_relation({"C", "next", "C"});
  for (int i = 0; i < len; ++i) b.add_instance({"n" + std::to_string(i), {"C"}, {}});
  for (int i = 0; i + 1 < len; ++i) b.add_edge({"n" + std::to_string(i), "next", "n" + std::to_string(i + 1)});
  return std::move(b).freeze();
}

/// Random graph with 1..50 nodes in total: 1..5 classes, the rest instances
/// with one or two types, and random labeled edges between any nodes.
inline KnowledgeGraph random_graph(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int total = pick(1, 50);
  const int classes = std::min(total, pick(1, 5));
  const int instances = total - classes;
  GraphBuilder b;
  std::vector<std::string> ids;
  for (int c = 0; c < classes; ++c) {
    ids.push_back("K" + std::to_string(c));
    b.add_class({ids.back(), "Class " + std::to_string(c), c % 2 ? "" : "random class"});
  }
  for (int i = 0; i < instances; ++i) {
    Instance inst{"i" + std::to_string(i), {"K" + std::to_string(pick(0, classes - 1))}, {}};
    if (classes > 1 && pick(0, 3) == 0) {
      auto second = "K" + std::to_string(pick(0, classes - 1));
      if (second != inst.types.front()) inst.types.push_back(second);
    }
    if (pick(0, 2) == 0) inst.properties["weight"] = static_cast<double>(pick(1, 99));
    if (pick(0, 3) == 0) inst.properties["label"] = "item " + std::to_string(i);
    ids.push_back(inst.id);
    b.add_instance(std::move(inst));
  }
  const char* predicates[] = {"rel", "partOf", "uses", "next"};
  std::vector<Edge> edges;
  const int edge_count = pick(0, total * 2);
  for (int e = 0; e < edge_count; ++e) {
    Edge edge{ids[pick(0, total - 1)], predicates[pick(0, 3)], ids[pick(0, total - 1)]};
    if (std::find(edges.begin(), edges.end(), edge) == edges.end()) edges.push_back(edge);
  }
  for (auto& e : edges) b.add_edge(e);
  for (int r = 0; r < classes; ++r) {
    b.add_relation({"K" + std::to_string(pick(0, classes - 1)), "rel" + std::to_string(r),
                    "K" + std::to_string(pick(0, classes - 1))});
  }
  return std::move(b).freeze();
}

inline std::string json_list(const std::vector<std::string>& ids) {
  std::string out = "[";
  for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? ", \"" : "\"") + ids[i] + "\"";
  return out + "]";
}

/// Ordered script of hostile replies: valid and invented ids, class requests,
/// malformed prose, fences, repeats and rare stops. `exhaustive` walkers
/// instead request every node once in a random order, which keeps every turn
/// productive and drives the iteration count towards its bound.
inline Script adversarial_script(const KnowledgeGraph& g, std::mt19937_64& rng, bool exhaustive) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto ids = g.node_ids();
  std::vector<std::string> class_ids;
  for (const auto& c : g.classes()) class_ids.push_back(c.id);
  auto any_id = [&] { return ids[pick(0, static_cast<int>(ids.size()) - 1)]; };

  Script s;
  const int n = static_cast<int>(ids.size());
  if (exhaustive) {
    // One start instance (if any), then every other node in random order.
    std::shuffle(ids.begin(), ids.end(), rng);
    auto first = std::find_if(ids.begin(), ids.end(), [&](const std::string& id) { return g.find_instance(id); });
    s.ordered.push_back(json_list(class_ids));
    if (first != ids.end()) {
      s.ordered.push_back(json_list({*first}));
      ids.erase(first);
    } else {
      s.ordered.push_back("[]");
    }
    for (const auto& id : ids) s.ordered.push_back(json_list({id}));
    s.ordered.push_back("<STOP>");
    return s;
  }

  // Step 1 (and the fallback, if the first answer yields nothing valid),
  // then step 2.
  s.ordered.push_back(pick(0, 4) == 0 ? "[\"NotAClass\"]" : json_list({class_ids[pick(0, static_cast<int>(class_ids.size()) - 1)]}));
  s.ordered.push_back(json_list(class_ids));
  s.ordered.push_back(pick(0, 1) ? json_list({any_id(), "ghost_start"}) : "[]");
  std::string previous = "[]";
  for (int t = 0; t < n + 6; ++t) {
    std::string reply;
    switch (pick(0, 11)) {
      case 0: reply = json_list({"ghost_" + std::to_string(pick(0, 999))}); break;
      case 1: reply = "{\"instances_of\": \"" + class_ids[pick(0, static_cast<int>(class_ids.size()) - 1)] + "\"}"; break;
      case 2: reply = "{\"instances_of\": \"Phantom\"}"; break;
      case 3: reply = "I am not sure what to ask next."; break;
      case 4: reply = "Next I need this:\n```json\n" + json_list({any_id(), any_id()}) + "\n```"; break;
      case 5: reply = previous; break;
      case 6: reply = pick(0, 5) == 0 ? "<STOP>" : json_list({any_id()}); break;
      case 7: reply = "[" + any_id() + ", " + any_id() + "]"; break;
      case 8: reply = json_list({any_id(), any_id(), "ghost", any_id()}); break;
      case 9: reply = "[\"" + any_id() + "\", 42, null]"; break;
      default: reply = json_list({any_id(), any_id(), any_id()}); break;
    }
    s.ordered.push_back(reply);
    previous = reply;
  }
  return s;
}

}  // namespace kgrag::fx
