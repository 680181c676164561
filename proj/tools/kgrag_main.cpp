// kgrag: query service, one-shot questions, question-bank runs and rating
// statistics over a knowledge graph.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <httplib.h>

#include "kgrag/demo_kg.hpp"
#include "kgrag/eval.hpp"
#include "kgrag/query_service.hpp"
#include "kgrag/stats.hpp"

namespace {

struct Options {
  std::string kg_path;
  std::string backend = "scripted";
  std::string script_path;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o-2024-11-20";
  double temperature = 1.0;
  std::int64_t seed = 42;
  int max_iterations = 25;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string ask;
  std::string role = "none";
  std::string prompts_path;
  std::string log_path;
  std::string cassette_path;
  std::string cassette_mode = "off";
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

kgrag::BackendConfig make_backend(const Options& o) {
  kgrag::BackendConfig config;
  if (o.backend == "http") {
    config = kgrag::http_backend(o.endpoint, o.model);
    config.temperature = o.temperature;
    config.seed = o.seed;
    config.cassette_path = o.cassette_path;
    if (o.cassette_mode == "record") config.cassette_mode = kgrag::CassetteMode::record;
    if (o.cassette_mode == "replay") config.cassette_mode = kgrag::CassetteMode::replay;
    if (config.cassette_mode != kgrag::CassetteMode::off && config.cassette_path.empty()) {
      throw std::invalid_argument("--cassette-mode needs --cassette");
    }
  } else {
    config.kind = kgrag::BackendConfig::Kind::scripted;
    config.script = std::make_shared<kgrag::Script>(o.script_path.empty() ? kgrag::demo_script()
                                                                          : kgrag::load_script_file(o.script_path));
  }
  return config;
}

kgrag::KnowledgeGraph make_graph(const Options& o) {
  return o.kg_path.empty() ? kgrag::build_demo_kg() : kgrag::load_graph_file(o.kg_path);
}

kgrag::PromptCatalog make_prompts(const Options& o) {
  return o.prompts_path.empty() ? kgrag::PromptCatalog::defaults() : kgrag::PromptCatalog::load_file(o.prompts_path);
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph question answering with LLM-guided traversal"};
  Options o;
  app.add_option("--kg", o.kg_path, "KG document (default: built-in demo graph)");
  app.add_option("--backend", o.backend, "LLM backend")->check(CLI::IsMember({"http", "scripted"}));
  app.add_option("--script", o.script_path, "Script file for the scripted backend (default: demo script)");
  app.add_option("--endpoint", o.endpoint, "Chat-completions endpoint URL");
  app.add_option("--model", o.model, "Model name sent to the endpoint");
  app.add_option("--temperature", o.temperature, "Sampling temperature");
  app.add_option("--seed", o.seed, "Sampling seed");
  app.add_option("--max-iterations", o.max_iterations, "Expansion iteration cap")->check(CLI::PositiveNumber);
  app.add_option("--port", o.port, "HTTP port")->check(CLI::Range(1, 65535));
  app.add_option("--host", o.host, "HTTP bind address");
  app.add_option("--ask", o.ask, "Answer one question, print answer and trace, exit");
  app.add_option("--role", o.role, "Role profile for --ask")->check(CLI::IsMember({"none", "worker", "developer"}));
  app.add_option("--prompts", o.prompts_path, "Prompt template file");
  app.add_option("--log", o.log_path, "Append every LLM exchange to this JSONL file");
  app.add_option("--cassette", o.cassette_path, "Cassette file for the http backend");
  app.add_option("--cassette-mode", o.cassette_mode, "Cassette mode")->check(CLI::IsMember({"off", "record", "replay"}));

  auto* export_cmd = app.add_subcommand("export-kg", "Write the demo KG document");
  std::string export_path;
  export_cmd->add_option("path", export_path, "Output path")->required();

  auto* prompts_cmd = app.add_subcommand("print-prompts", "Print the prompt templates in use as JSON");

  auto* eval_cmd = app.add_subcommand("eval", "Run a question bank and write transcripts");
  std::string bank_path, transcript_path;
  eval_cmd->add_option("--bank", bank_path, "Question bank file")->required();
  eval_cmd->add_option("--out", transcript_path, "Transcript output file")->required();

  auto* stats_cmd = app.add_subcommand("stats", "Descriptive statistics and Kendall tau matrices of ratings");
  std::string ratings_path, reference_path, stats_role = "worker", stats_criterion = "helpfulness_understandability";
  std::string stats_kind = "box";
  stats_cmd->add_option("--ratings", ratings_path, "Ratings CSV");
  stats_cmd->add_option("--reference", reference_path, "Reference tau matrices CSV (re-rendered as-is)");
  stats_cmd->add_option("--rater", stats_role, "Rater role")->check(CLI::IsMember({"worker", "developer"}));
  stats_cmd->add_option("--criterion", stats_criterion, "Rating criterion")
      ->check(CLI::IsMember({"helpfulness_understandability", "structure", "length_appropriateness"}));
  stats_cmd->add_option("--what", stats_kind, "Output table")->check(CLI::IsMember({"box", "tau"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*export_cmd) {
      kgrag::export_demo_kg(export_path);
      return 0;
    }
    if (*prompts_cmd) {
      std::cout << make_prompts(o).to_json();
      return 0;
    }
    if (*stats_cmd) {
      const auto role = kgrag::parse_rater_role(stats_role);
      const auto criterion = kgrag::parse_criterion(stats_criterion);
      if (!reference_path.empty()) {
        for (const auto& ref : kgrag::parse_reference_matrices(read_file(reference_path))) {
          if (ref.role == role && ref.criterion == criterion) std::cout << kgrag::render_tau_matrix(ref.matrix);
        }
        return 0;
      }
      if (ratings_path.empty()) throw std::invalid_argument("stats needs --ratings or --reference");
      const auto ratings = kgrag::load_ratings_file(ratings_path);
      if (stats_kind == "tau") {
        std::cout << kgrag::render_tau_matrix(kgrag::pairwise_tau_matrix(ratings, role, criterion));
      } else {
        std::cout << kgrag::boxplot_table(ratings, role, criterion);
      }
      return 0;
    }

    const auto graph = std::make_shared<const kgrag::KnowledgeGraph>(make_graph(o));
    const auto backend = make_backend(o);
    kgrag::TraversalConfig traversal{o.max_iterations};

    if (*eval_cmd) {
      kgrag::EvalConfig config{traversal, make_prompts(o)};
      std::ofstream out(transcript_path, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + transcript_path);
      const auto bank = kgrag::load_question_bank(bank_path);
      const auto transcripts = kgrag::run_question_bank(bank, *graph, backend, config, &out);
      std::size_t failed = 0;
      for (const auto& t : transcripts) failed += t.error.empty() ? 0 : 1;
      std::cerr << transcripts.size() << " transcripts written to " << transcript_path << ", " << failed
                << " with errors\n";
      return 0;
    }

    std::ofstream log_file;
    kgrag::ServiceOptions options{traversal, make_prompts(o), nullptr};
    if (!o.log_path.empty()) {
      log_file.open(o.log_path, std::ios::binary | std::ios::app);
      if (!log_file) throw std::runtime_error("cannot open " + o.log_path);
      options.exchange_log = std::make_shared<kgrag::JsonlExchangeSink>(log_file);
    }
    kgrag::QueryService service(graph, {{o.backend, backend}}, o.backend, options);

    if (!o.ask.empty()) {
      kgrag::RetrievalSession session;
      try {
        const auto response = service.handle_query({o.ask, kgrag::parse_role_profile(o.role), std::nullopt}, &session);
        std::cout << kgrag::render_one_shot(response, session);
        return 0;
      } catch (const kgrag::ServiceError& e) {
        std::cerr << "error (" << e.status() << "): " << e.what() << "\n";
        if (session.stop_reason) std::cerr << kgrag::render_trace(session);
        return e.status() == 400 ? 2 : 3;
      }
    }

    httplib::Server server;
    service.mount(server);
    g_server = &server;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);
    std::cerr << "listening on http://" << o.host << ":" << o.port << "\n";
    if (!server.listen(o.host, o.port)) {
      std::cerr << "cannot listen on " << o.host << ":" << o.port << "\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
