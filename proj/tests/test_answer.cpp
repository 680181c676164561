#include <gtest/gtest.h>

#include "kgrag/answer.hpp"
#include "kgrag/demo_kg.hpp"
#include "support.hpp"

using namespace kgrag;

namespace {

const KnowledgeGraph& demo() {
  static const KnowledgeGraph g = build_demo_kg();
  return g;
}

RetrievalSession demo_session() {
  auto script = demo_script();
  script.ordered.pop_back();  // keep the five traversal replies
  return ontology_based_retrieval(demo(), kDemoQuestion, scripted_backend(script.ordered));
}

}  // namespace

TEST(ComposeAnswer, WorkedExampleMentionsScrewPlacement) {
  auto session = demo_session();
  auto client = make_client(scripted_backend({demo_script().ordered.back()}));
  auto ex = compose_answer(session, RoleProfile::none, *client);
  EXPECT_NE(ex.answer.find("ScrewPlacement"), std::string::npos);
  EXPECT_EQ(ex.session, &session);
  EXPECT_EQ(client->calls(), 1u);
  EXPECT_EQ(ex.cited_node_ids, (std::vector<std::string>{"niryo_dataset_september_2024", "model_a23b", "model_xT77",
                                                         "model_p1b3", "model_qdk1", "ScrewPlacement"}));
}

TEST(ComposeAnswer, FreshContextWithQueryNodesAndStyle) {
  auto session = demo_session();
  const auto prompts = PromptCatalog::defaults();
  std::vector<ChatMessage> sent;
  struct Capture : ExchangeSink {
    std::vector<ChatMessage>* out;
    void record(const std::vector<ChatMessage>& request, std::string_view) override { *out = request; }
  };
  auto sink = std::make_shared<Capture>();
  sink->out = &sent;
  auto client = make_client(scripted_backend({"ok"}), sink);
  compose_answer(session, RoleProfile::worker, *client);
  ASSERT_EQ(sent.size(), 2u);
  EXPECT_EQ(sent[0].content, prompts.answer_system);
  const auto& prompt = sent[1].content;
  const auto q = prompt.find(kDemoQuestion);
  const auto first_node = prompt.find("id: niryo_dataset_september_2024\n");
  const auto last_node = prompt.find("id: ScrewPlacement\n");
  const auto style = prompt.find(prompts.answer_worker);
  ASSERT_NE(q, std::string::npos);
  ASSERT_NE(style, std::string::npos);
  EXPECT_LT(q, first_node);
  EXPECT_LT(first_node, prompt.find("id: model_a23b\n"));
  EXPECT_LT(prompt.find("id: model_qdk1\n"), last_node);
  EXPECT_LT(last_node, style);
  for (const auto& n : session.node_dict) EXPECT_NE(prompt.find(n.structure), std::string::npos);
}

TEST(ComposeAnswer, NoResultMakesNoCall) {
  auto session = ontology_based_retrieval(demo(), "What is the weather like?", scripted_backend({"[]", "[]"}));
  ASSERT_EQ(session.stop_reason, StopReason::no_result);
  auto client = make_client(scripted_backend({}));
  auto ex = compose_answer(session, RoleProfile::developer, *client);
  EXPECT_EQ(ex.answer, PromptCatalog::defaults().answer_no_result);
  EXPECT_TRUE(ex.cited_node_ids.empty());
  EXPECT_EQ(client->calls(), 0u);
}

TEST(ComposeAnswer, StressQuestionNamesEasierTask) {
  auto backend = scripted_backend({});
  backend.script = std::make_shared<Script>(load_script_file(fx::fixture_path("robustness_script.json")));
  auto client = make_client(backend);
  auto session = ontology_based_retrieval(demo(), "What task is easier?", *client);
  EXPECT_EQ(session.node_ids(), (std::vector<std::string>{"ScrewPlacement", "ScrewPicking"}));
  ASSERT_EQ(session.warnings.size(), 1u);
  auto ex = compose_answer(session, RoleProfile::none, *client);
  EXPECT_NE(ex.answer.find("ScrewPicking appears to be the easier task"), std::string::npos);
  EXPECT_EQ(ex.cited_node_ids, (std::vector<std::string>{"ScrewPlacement", "ScrewPicking"}));
}

TEST(ComposeAnswer, RequiresTerminatedSession) {
  RetrievalSession open;
  auto client = make_client(scripted_backend({"x"}));
  EXPECT_THROW(compose_answer(open, RoleProfile::none, *client), std::logic_error);
}

TEST(ComposeAnswer, OverflowSurfacesAsError) {
  auto session = demo_session();
  auto config = scripted_backend({"never"});
  config.max_context_chars = 100;
  auto client = make_client(config);
  EXPECT_THROW(compose_answer(session, RoleProfile::none, *client), ContextOverflowError);
}

TEST(AnswerPrompt, RolesChangeOnlyTheStyleSegment) {
  auto session = demo_session();
  const auto prompts = PromptCatalog::defaults();
  auto strip = [&](std::string prompt, const std::string& style) {
    const auto at = prompt.rfind(style);
    EXPECT_NE(at, std::string::npos);
    EXPECT_EQ(at + style.size(), prompt.size());
    return prompt.substr(0, at);
  };
  const auto none = strip(build_answer_prompt(session, RoleProfile::none), prompts.answer_none);
  const auto worker = strip(build_answer_prompt(session, RoleProfile::worker), prompts.answer_worker);
  const auto developer = strip(build_answer_prompt(session, RoleProfile::developer), prompts.answer_developer);
  EXPECT_EQ(none, worker);
  EXPECT_EQ(none, developer);
  EXPECT_NE(build_answer_prompt(session, RoleProfile::worker), build_answer_prompt(session, RoleProfile::developer));
}

TEST(AnswerPrompt, EmptyContextSaysNoInstanceFound) {
  RetrievalSession s;
  s.query = "q";
  s.stop_reason = StopReason::no_new_info;
  EXPECT_NE(build_answer_prompt(s, RoleProfile::none).find("No instance found"), std::string::npos);
}

TEST(Citations, MarkdownDecoratedIdsAreFound) {
  auto session = demo_session();
  auto cited = extract_cited_nodes(
      "The dataset *niryo_dataset_september_2024* feeds models that achieve **ScrewPlacement**.", session.node_dict);
  EXPECT_EQ(cited, (std::vector<std::string>{"niryo_dataset_september_2024", "ScrewPlacement"}));
}

TEST(Citations, LabelsCount) {
  auto session = demo_session();
  auto cited = extract_cited_nodes("Model xT77 uses a decision tree.", session.node_dict);
  EXPECT_EQ(cited, (std::vector<std::string>{"model_xT77"}));
}

TEST(Citations, EmptyAnswer) { EXPECT_TRUE(extract_cited_nodes("", demo_session().node_dict).empty()); }

TEST(Citations, OnlyRetrievedNodesCount) {
  auto session = demo_session();
  EXPECT_TRUE(extract_cited_nodes("ScrewPicking is done by niryo_ned2.", session.node_dict).empty());
}

TEST(Citations, SubsetOfNodeDictProperty) {
  auto session = demo_session();
  std::mt19937_64 rng(9);
  auto ids = demo().node_ids();
  for (int round = 0; round < 200; ++round) {
    std::string answer;
    for (int w = 0; w < 6; ++w) answer += ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)] + " ";
    for (const auto& id : extract_cited_nodes(answer, session.node_dict)) EXPECT_TRUE(session.has_node(id)) << id;
  }
}

TEST(RoleProfile, Names) {
  for (auto r : {RoleProfile::none, RoleProfile::worker, RoleProfile::developer}) {
    EXPECT_EQ(parse_role_profile(role_profile_name(r)), r);
  }
  EXPECT_THROW(parse_role_profile("manager"), std::invalid_argument);
}
