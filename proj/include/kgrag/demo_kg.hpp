#pragma once

#include <string>

#include "kgrag/kg_store.hpp"
#include "kgrag/llm_gateway.hpp"

namespace kgrag {

/// Screw-placement demo graph: an ML-Schema style ontology extended with
/// tasks, explanations and the robot cell (arm, gripper, screws, test
/// cases), plus the Niryo dataset, its four models and their tasks.
KnowledgeGraph build_demo_kg();

/// Writes dump_graph(build_demo_kg()) to `path` and returns the document.
/// Throws std::runtime_error if the file cannot be written.
std::string export_demo_kg(const std::string& path);

inline constexpr std::string_view kDemoQuestion =
    "List all tasks which are influenced by the dataset niryo september 2024?";

/// Ordered script that walks the demo question: class Dataset, the niryo
/// start node, the four models, ScrewPlacement, <STOP>, then a final answer.
Script demo_script();

}  // namespace kgrag
