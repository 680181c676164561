#include "kgrag/eval.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace kgrag {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<Category, std::string_view>, 8> kCategories{{
    {Category::standard, "standard"},
    {Category::ambiguity, "ambiguity"},
    {Category::contradictions, "contradictions"},
    {Category::out_of_scope, "out_of_scope"},
    {Category::overgeneralization_bias, "overgeneralization_bias"},
    {Category::instructional_confusion, "instructional_confusion"},
    {Category::complex_cross_referencing, "complex_cross_referencing"},
    {Category::prompt_injection, "prompt_injection"},
}};

}  // namespace

std::string_view category_name(Category c) {
  for (const auto& [cat, name] : kCategories) {
    if (cat == c) return name;
  }
  return "standard";
}

Category parse_category(std::string_view name) {
  for (const auto& [cat, n] : kCategories) {
    if (n == name) return cat;
  }
  throw std::invalid_argument("unknown question category: " + std::string(name));
}

bool is_robustness(Category c) { return c != Category::standard; }

// ---------------------------------------------------------------------------
// Question banks

std::vector<QuestionItem> parse_question_bank(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed question bank: ") + e.what());
  }
  if (!doc.is_array()) throw std::invalid_argument("question bank must be a list");

  std::vector<QuestionItem> bank;
  std::unordered_set<std::string> ids;
  for (const auto& entry : doc) {
    auto str = [&](const char* key, bool required) -> std::string {
      auto it = entry.find(key);
      if (it == entry.end()) {
        if (required) throw std::invalid_argument(std::string("question entry missing '") + key + "'");
        return {};
      }
      if (!it->is_string()) throw std::invalid_argument(std::string("question field '") + key + "' must be a string");
      return it->get<std::string>();
    };
    if (!entry.is_object()) throw std::invalid_argument("question entry must be an object");
    QuestionItem q;
    q.id = str("id", true);
    q.text = str("text", true);
    q.category = parse_category(str("category", true));
    q.expected = str("expected", false);
    q.role = parse_role_profile(str("role", false));
    if (q.id.empty()) throw std::invalid_argument("question id must not be empty");
    if (!ids.insert(q.id).second) throw std::invalid_argument("duplicate question id: " + q.id);
    if (is_robustness(q.category) && q.expected.empty()) {
      throw std::invalid_argument("robustness question " + q.id + " needs an expected pattern");
    }
    bank.push_back(std::move(q));
  }
  return bank;
}

std::vector<QuestionItem> load_question_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open question bank: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_question_bank(buf.str());
}

// ---------------------------------------------------------------------------
// Transcript files

namespace {

constexpr std::array<std::string_view, 14> kHeaders{
    "#Transcript", "#Category", "#Role",  "#Question", "#Expected", "#Answer",     "#Notes",
    "#Trace",      "#StopReason", "#Iterations", "#Cited", "#Error", "#WallTimeMs", "#End"};

bool is_header(std::string_view line) {
  for (auto h : kHeaders) {
    if (line == h) return true;
  }
  return false;
}

std::string escape_lines(std::string_view content) {
  std::string out;
  std::size_t pos = 0;
  for (;;) {
    const auto nl = content.find('\n', pos);
    const auto line = content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && (line.front() == '#' || line.front() == '\\')) out.push_back('\\');
    out.append(line);
    if (nl == std::string_view::npos) break;
    out.push_back('\n');
    pos = nl + 1;
  }
  return out;
}

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void section(std::string& out, std::string_view header, std::string_view content) {
  out.append(header);
  out.push_back('\n');
  out.append(escape_lines(content));
  out.append("\n\n");
}

std::string join_lines(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i != 0) out.push_back('\n');
    out.append(items[i]);
  }
  return out;
}

std::string render_notes(const std::vector<std::string>& notes) {
  std::vector<std::string> lines;
  for (const auto& note : notes) {
    std::string line = "- ";
    for (char ch : note) {
      line.push_back(ch);
      if (ch == '\n') line.append("  ");
    }
    lines.push_back(std::move(line));
  }
  return join_lines(lines);
}

std::vector<std::string> parse_notes(const std::vector<std::string>& lines) {
  std::vector<std::string> notes;
  for (const auto& line : lines) {
    if (line.rfind("- ", 0) == 0) {
      notes.push_back(line.substr(2));
    } else if (line.rfind("  ", 0) == 0 && !notes.empty()) {
      notes.back() += "\n" + line.substr(2);
    } else {
      throw std::invalid_argument("malformed note line: '" + line + "'");
    }
  }
  return notes;
}

std::string trace_line(const TraceRecord& r) {
  ordered_json j;
  j["iteration"] = r.iteration;
  j["query_kind"] = r.query_kind;
  j["requested"] = r.requested;
  j["resolved"] = r.resolved;
  j["new_nodes"] = r.new_nodes;
  j["info_chars"] = r.info_chars;
  return j.dump();
}

TraceRecord parse_trace_line(const std::string& line) {
  try {
    auto j = json::parse(line);
    TraceRecord r;
    r.iteration = j.at("iteration").get<int>();
    r.query_kind = j.at("query_kind").get<std::string>();
    r.requested = j.at("requested").get<std::vector<std::string>>();
    r.resolved = j.at("resolved").get<std::vector<std::string>>();
    r.new_nodes = j.at("new_nodes").get<std::size_t>();
    r.info_chars = j.at("info_chars").get<std::size_t>();
    return r;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed trace line: ") + e.what());
  }
}

}  // namespace

std::string render_transcripts(const std::vector<Transcript>& transcripts) {
  std::string out;
  for (const auto& t : transcripts) {
    std::vector<std::string> trace;
    for (const auto& r : t.trace) trace.push_back(trace_line(r));
    section(out, "#Transcript", t.question.id);
    section(out, "#Category", category_name(t.question.category));
    section(out, "#Role", role_profile_name(t.question.role));
    section(out, "#Question", t.question.text);
    section(out, "#Expected", t.question.expected);
    section(out, "#Answer", t.answer);
    section(out, "#Notes", render_notes(t.notes));
    section(out, "#Trace", join_lines(trace));
    section(out, "#StopReason", stop_reason_name(t.stop_reason));
    section(out, "#Iterations", std::to_string(t.iterations));
    section(out, "#Cited", join_lines(t.cited_node_ids));
    section(out, "#Error", t.error);
    section(out, "#WallTimeMs", num(t.wall_time_ms));
    out.append("#End\n\n");
  }
  return out;
}

std::vector<Transcript> parse_transcripts(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) {
        lines.emplace_back(text.substr(pos));
        break;
      }
      lines.emplace_back(text.substr(pos, nl - pos));
      pos = nl + 1;
    }
  }

  std::vector<Transcript> out;
  Transcript current;
  bool open = false;
  std::size_t i = 0;
  while (i < lines.size()) {
    const auto& header = lines[i];
    if (header.empty() && !open) {
      ++i;
      continue;
    }
    if (!is_header(header)) throw std::invalid_argument("expected a section header, got '" + header + "'");
    ++i;
    if (header == "#End") {
      if (!open) throw std::invalid_argument("#End without #Transcript");
      out.push_back(std::move(current));
      current = Transcript{};
      open = false;
      continue;
    }
    std::vector<std::string> body;
    while (i < lines.size() && !is_header(lines[i])) {
      auto line = lines[i++];
      if (!line.empty() && line.front() == '\\') line.erase(line.begin());
      body.push_back(std::move(line));
    }
    if (body.empty() || !body.back().empty()) {
      throw std::invalid_argument("section " + header + " is not terminated by a blank line");
    }
    body.pop_back();
    const auto content = join_lines(body);

    if (header == "#Transcript") {
      if (open) throw std::invalid_argument("nested #Transcript");
      open = true;
      current.question.id = content;
      continue;
    }
    if (!open) throw std::invalid_argument(header + " outside a transcript");
    if (header == "#Category") {
      current.question.category = parse_category(content);
    } else if (header == "#Role") {
      current.question.role = parse_role_profile(content);
    } else if (header == "#Question") {
      current.question.text = content;
    } else if (header == "#Expected") {
      current.question.expected = content;
    } else if (header == "#Answer") {
      current.answer = content;
    } else if (header == "#Notes") {
      current.notes = content.empty() ? std::vector<std::string>{} : parse_notes(body);
    } else if (header == "#Trace") {
      current.trace.clear();
      if (!content.empty()) {
        for (const auto& l : body) current.trace.push_back(parse_trace_line(l));
      }
    } else if (header == "#StopReason") {
      current.stop_reason = parse_stop_reason(content);
    } else if (header == "#Iterations") {
      current.iterations = std::stoi(content);
    } else if (header == "#Cited") {
      current.cited_node_ids = content.empty() ? std::vector<std::string>{} : body;
    } else if (header == "#Error") {
      current.error = content;
    } else if (header == "#WallTimeMs") {
      double v = 0;
      auto [ptr, ec] = std::from_chars(content.data(), content.data() + content.size(), v);
      if (ec != std::errc{} || ptr != content.data() + content.size()) {
        throw std::invalid_argument("bad wall time: " + content);
      }
      current.wall_time_ms = v;
    }
  }
  if (open) throw std::invalid_argument("transcript without #End");
  return out;
}

// ---------------------------------------------------------------------------
// Running a bank

std::vector<Transcript> run_question_bank(const std::vector<QuestionItem>& bank, const KnowledgeGraph& graph,
                                          const BackendConfig& backend, const EvalConfig& config,
                                          std::ostream* sink) {
  std::vector<Transcript> out;
  out.reserve(bank.size());
  for (const auto& q : bank) {
    Transcript t;
    t.question = q;
    const auto started = std::chrono::steady_clock::now();
    try {
      auto client = make_client(backend);
      auto session = ontology_based_retrieval(graph, q.text, *client, config.traversal, config.prompts);
      t.trace = session.trace;
      t.stop_reason = *session.stop_reason;
      t.iterations = session.iteration;
      for (const auto& w : session.warnings) t.notes.push_back("warning: " + w);
      if (t.stop_reason == StopReason::backend_failure) {
        t.error = session.failure;
      } else {
        auto ex = compose_answer(session, q.role, *client, config.prompts);
        t.answer = ex.answer;
        t.cited_node_ids = ex.cited_node_ids;
      }
    } catch (const std::exception& e) {
      t.error = e.what();
    }
    t.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    if (sink != nullptr) {
      *sink << render_transcripts({t});
      sink->flush();
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace kgrag
