#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>

#include "kgrag/demo_kg.hpp"
#include "kgrag/eval.hpp"
#include "kgrag/prompts.hpp"
#include "support.hpp"

using namespace kgrag;

namespace {

struct Run {
  int exit_code = -1;
  std::string out;
};

/// Runs the CLI with `args` (already shell-quoted) and captures stdout.
Run run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + KGRAG_CLI_PATH + "' " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "kgrag_cli_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Cli, AskDemoQuestion) {
  auto r = run_cli("--ask " + shell_quote(kDemoQuestion));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("ScrewPlacement"), std::string::npos);
  EXPECT_NE(r.out.find("--- trace ---"), std::string::npos);
  EXPECT_NE(r.out.find("stop: llm_stop after 2 expansion iterations"), std::string::npos) << r.out;
}

TEST(Cli, AskIsDeterministic) {
  EXPECT_EQ(run_cli("--ask " + shell_quote(kDemoQuestion)).out, run_cli("--ask " + shell_quote(kDemoQuestion)).out);
}

TEST(Cli, EmptyQuestionExitsTwo) { EXPECT_EQ(run_cli("--ask ' '").exit_code, 2); }

TEST(Cli, ExhaustedScriptExitsThree) {
  const auto path = scratch("empty_script.json");
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("[]", f);
    std::fclose(f);
  }
  EXPECT_EQ(run_cli("--script " + shell_quote(path.string()) + " --ask hi").exit_code, 3);
}

TEST(Cli, BadOptionIsRejected) { EXPECT_NE(run_cli("--no-such-flag").exit_code, 0); }

TEST(Cli, ExportKgMatchesFixture) {
  const auto path = scratch("demo.kg");
  ASSERT_EQ(run_cli("export-kg " + shell_quote(path.string())).exit_code, 0);
  EXPECT_EQ(fx::read_file(path.string()), fx::read_file(fx::fixture_path("niryo_demo.kg")));
}

TEST(Cli, PrintPrompts) {
  auto r = run_cli("print-prompts");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(PromptCatalog::parse(r.out), PromptCatalog::defaults());
}

TEST(Cli, AskWithLoadedGraphAndPrompts) {
  auto r = run_cli("--kg " + shell_quote(fx::fixture_path("niryo_demo.kg")) + " --prompts " +
                   shell_quote(fx::fixture_path("prompts.json")) + " --script " +
                   shell_quote(fx::fixture_path("demo_script.json")) + " --ask " + shell_quote(kDemoQuestion));
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out, run_cli("--ask " + shell_quote(kDemoQuestion)).out);
}

TEST(Cli, EvalWritesParseableTranscripts) {
  const auto out = scratch("robustness.txt");
  auto r = run_cli("--script " + shell_quote(fx::fixture_path("robustness_script.json")) + " eval --bank " +
                   shell_quote(fx::fixture_path("robustness_bank.json")) + " --out " + shell_quote(out.string()));
  ASSERT_EQ(r.exit_code, 0);
  auto transcripts = parse_transcripts(fx::read_file(out.string()));
  ASSERT_EQ(transcripts.size(), 24u);
  for (const auto& t : transcripts) EXPECT_TRUE(t.error.empty()) << t.question.id;
}

TEST(Cli, StatsTau) {
  const auto ratings = scratch("ratings.csv");
  {
    std::FILE* f = std::fopen(ratings.c_str(), "w");
    std::fputs("participant,role,question,criterion,score\n"
               "p1,worker,1,helpfulness_understandability,4\np1,worker,2,helpfulness_understandability,2\n"
               "p2,worker,1,helpfulness_understandability,3\np2,worker,2,helpfulness_understandability,5\n",
               f);
    std::fclose(f);
  }
  auto r = run_cli("stats --ratings " + shell_quote(ratings.string()) + " --what tau");
  ASSERT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("-1.0000"), std::string::npos) << r.out;
  auto box = run_cli("stats --ratings " + shell_quote(ratings.string()) + " --what box");
  EXPECT_EQ(box.exit_code, 0);
  EXPECT_EQ(box.out,
            "question\tn\tmean\tmedian\tq1\tq3\tiqr\twhisker_low\twhisker_high\toutliers\n"
            "1\t2\t3.5\t3.5\t3.25\t3.75\t0.5\t3\t4\t\n"
            "2\t2\t3.5\t3.5\t2.75\t4.25\t1.5\t2\t5\t\n");
}

TEST(Cli, StatsReferenceRerender) {
  auto r = run_cli("stats --reference " + shell_quote(fx::fixture_path("tau_reference_matrices.csv")));
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("0.4367"), std::string::npos) << r.out;
}
