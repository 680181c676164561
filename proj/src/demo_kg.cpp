#include "kgrag/demo_kg.hpp"

#include <array>
#include <fstream>
#include <stdexcept>
#include <string_view>

namespace kgrag {

namespace {

struct ModelSpec {
  std::string_view id;
  std::string_view tag;
  std::string_view algorithm;
};

// The algorithm-to-model assignment follows the listed order and is fixture
// data only; the source material names the four families but not the mapping.
constexpr std::array<ModelSpec, 4> kModels{{
    {"model_a23b", "a23b", "logistic regression"},
    {"model_xT77", "xT77", "decision tree"},
    {"model_p1b3", "p1b3", "random forest"},
    {"model_qdk1", "qdk1", "neural network"},
}};

constexpr std::string_view kDataset = "niryo_dataset_september_2024";

Instance instance(std::string id, std::vector<std::string> types,
                  std::map<std::string, Literal> props = {}) {
  return {std::move(id), std::move(types), std::move(props)};
}

}  // namespace

KnowledgeGraph build_demo_kg() {
  GraphBuilder b;

  // Class level. "Globalsight" from the class diagram is normalized to
  // GlobalInsight; the dataset class keeps the id Dataset with the DataSet
  // display label.
  b.add_class({"Preprocessing", "Preprocessing",
               "Describes the methods and algorithms with which the dataset was created"});
  b.add_class({"Dataset", "DataSet", "A Dataset consisting of multiple Rows."});
  b.add_class({"GlobalInsight", "Global Insight",
               "A global insight is a concrete explanation of a model."});
  b.add_class({"Model", "Model", "A model is an algorithm trained on data."});
  b.add_class({"Task", "Task", "The task that a model fulfills"});
  b.add_class({"Attribute", "Attribute", "A feature (column) recorded in a dataset."});
  b.add_class({"Gripper", "Gripper", "End effector a robot arm uses to hold screws."});
  b.add_class({"Material", "Material", "Material a mechanical component is made of."});
  b.add_class({"Mechanical_Component", "Mechanical Component",
               "A mechanical part of the manufacturing cell."});
  b.add_class({"Robotarm", "Robot arm", "A robotic manipulator that performs tasks."});
  b.add_class({"Screw", "Screw", "A screw handled by the robot arm."});
  b.add_class({"TestCase", "Test case", "One recorded execution of a task; a row of a dataset."});

  // Class diagram arrows. trainedBy/isAchievedBy from the diagram are stored
  // under the instance-level names trainedWith/achievedBy.
  b.add_relation({"Preprocessing", "done_for", "Model"});
  b.add_relation({"Preprocessing", "hasInput", "Dataset"});
  b.add_relation({"Model", "trainedWith", "Dataset"});
  b.add_relation({"Dataset", "usedBy", "Model"});
  b.add_relation({"Model", "achieves", "Task"});
  b.add_relation({"Task", "achievedBy", "Model"});
  b.add_relation({"GlobalInsight", "explains", "Model"});
  b.add_relation({"Dataset", "hasAttribute", "Attribute"});
  b.add_relation({"Robotarm", "performs", "Task"});
  b.add_relation({"Robotarm", "hasGripper", "Gripper"});
  b.add_relation({"Screw", "madeOf", "Material"});
  b.add_relation({"Gripper", "madeOf", "Material"});
  b.add_relation({"TestCase", "partOf", "Dataset"});
  b.add_relation({"TestCase", "usesScrew", "Screw"});
  b.add_relation({"TestCase", "executedBy", "Robotarm"});

  b.add_instance(instance(std::string(kDataset), {"Dataset"},
                          {{"label", "niryo september 2024"},
                           {"description",
                            "Screw placement trials recorded on the Niryo robot cell in "
                            "September 2024; screw geometry and robot-arm attributes per trial."}}));

  for (const auto& attr : {std::pair{"screw_angle", "Insertion angle of the hole"},
                           std::pair{"screw_length", "Length of the screw"},
                           std::pair{"arm_velocity", "Robot-arm approach velocity"}}) {
    b.add_instance(instance(attr.first, {"Attribute"}, {{"description", attr.second}}));
    b.add_edge({std::string(kDataset), "hasAttribute", attr.first});
  }

  b.add_instance(instance("ScrewPlacement", {"Task"},
                          {{"description", "Placing screws into holes at varying angles."}}));
  b.add_instance(instance("ScrewPicking", {"Task"},
                          {{"description", "Picking up screws from different positions."}}));

  for (const auto& m : kModels) {
    const std::string id(m.id);
    b.add_instance(instance(id, {"Model"},
                            {{"label", "Model " + std::string(m.tag)},
                             {"algorithm", std::string(m.algorithm)}}));
    b.add_edge({id, "trainedWith", std::string(kDataset)});
    b.add_edge({std::string(kDataset), "usedBy", id});
    b.add_edge({id, "achieves", "ScrewPlacement"});
    b.add_edge({"ScrewPlacement", "achievedBy", id});
  }

  for (const auto& tag : {"a23b", "xT77"}) {
    const std::string model = "model_" + std::string(tag);
    const std::string prep = "preprocessing_niryo_" + std::string(tag);
    const std::string insight = "global_insight_" + std::string(tag);
    b.add_instance(instance(prep, {"Preprocessing"},
                            {{"label", "Preprocessing niryo " + std::string(tag)},
                             {"description", "Feature scaling and train/test split of the niryo trials."}}));
    b.add_edge({prep, "done_for", model});
    b.add_edge({prep, "hasInput", std::string(kDataset)});
    b.add_instance(instance(insight, {"GlobalInsight"},
                            {{"label", "Global Insights " + std::string(tag)},
                             {"method", "Shapley values"},
                             {"description", "Global feature importance of the model's predictions."}}));
    b.add_edge({insight, "explains", model});
  }

  b.add_instance(instance("niryo_ned2", {"Robotarm"}, {{"label", "Niryo Ned2"}}));
  b.add_instance(instance("niryo_vacuum_gripper", {"Gripper", "Mechanical_Component"}));
  b.add_instance(instance("steel", {"Material"}));
  b.add_instance(instance("abs_plastic", {"Material"}, {{"label", "ABS plastic"}}));
  b.add_instance(instance("screw_m4x20", {"Screw", "Mechanical_Component"},
                          {{"diameter_mm", 4.0}, {"length_mm", 20.0}}));
  b.add_instance(instance("testcase_0001", {"TestCase"}, {{"angle_deg", 30.0}, {"success", "yes"}}));

  b.add_edge({"niryo_ned2", "performs", "ScrewPlacement"});
  b.add_edge({"niryo_ned2", "performs", "ScrewPicking"});
  b.add_edge({"niryo_ned2", "hasGripper", "niryo_vacuum_gripper"});
  b.add_edge({"niryo_vacuum_gripper", "madeOf", "abs_plastic"});
  b.add_edge({"screw_m4x20", "madeOf", "steel"});
  b.add_edge({"testcase_0001", "partOf", std::string(kDataset)});
  b.add_edge({"testcase_0001", "usesScrew", "screw_m4x20"});
  b.add_edge({"testcase_0001", "executedBy", "niryo_ned2"});

  return std::move(b).freeze();
}

Script demo_script() {
  Script s;
  s.ordered = {
      R"(["Dataset"])",
      R"(["niryo_dataset_september_2024"])",
      R"(["model_a23b", "model_xT77", "model_p1b3", "model_qdk1"])",
      R"(["ScrewPlacement"])",
      "<STOP>",
      "ScrewPlacement is the only task connected to niryo_dataset_september_2024. The four models "
      "trained with this dataset (model_a23b, model_xT77, model_p1b3 and model_qdk1) all achieve "
      "ScrewPlacement, so the task depends on the trials recorded in that dataset.",
  };
  return s;
}

std::string export_demo_kg(const std::string& path) {
  auto doc = dump_graph(build_demo_kg());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write KG document: " + path);
  out << doc;
  if (!out) throw std::runtime_error("failed writing KG document: " + path);
  return doc;
}

}  // namespace kgrag
