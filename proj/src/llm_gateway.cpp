#include "kgrag/llm_gateway.hpp"

#include <cstdlib>
#include <deque>
#include <fstream>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include <httplib.h>
#include <json.hpp>

namespace kgrag {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view role_name(Role role) {
  switch (role) {
    case Role::system:
      return "system";
    case Role::user:
      return "user";
    case Role::assistant:
      return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view name) {
  if (name == "system") return Role::system;
  if (name == "user") return Role::user;
  if (name == "assistant") return Role::assistant;
  throw std::invalid_argument("unknown chat role: " + std::string(name));
}

// ---------------------------------------------------------------------------
// ChatHistory

void ChatHistory::set_system(std::string content) {
  if (!messages_.empty()) throw std::logic_error("system message must come first");
  messages_.push_back({Role::system, std::move(content)});
}

void ChatHistory::append_user(std::string content) {
  if (!messages_.empty() && messages_.back().role == Role::user) {
    throw std::logic_error("user messages must alternate with assistant messages");
  }
  messages_.push_back({Role::user, std::move(content)});
}

void ChatHistory::append_assistant(std::string content) {
  if (messages_.empty() || messages_.back().role != Role::user) {
    throw std::logic_error("assistant message must follow a user message");
  }
  messages_.push_back({Role::assistant, std::move(content)});
}

std::string ChatHistory::last_assistant() const {
  for (auto it = messages_.rbegin(); it != messages_.rend(); ++it) {
    if (it->role == Role::assistant) return it->content;
  }
  return {};
}

// ---------------------------------------------------------------------------
// Scripts and configs

Script parse_script(std::string_view document) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(document.begin(), document.end());
  } catch (const ordered_json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed script: ") + e.what());
  }
  Script script;
  auto read_ordered = [&](const ordered_json& list) {
    if (!list.is_array()) throw std::invalid_argument("script 'ordered' must be a list");
    for (const auto& item : list) {
      if (!item.is_string()) throw std::invalid_argument("script responses must be strings");
      script.ordered.push_back(item.get<std::string>());
    }
  };
  if (doc.is_array()) {
    read_ordered(doc);
    return script;
  }
  if (!doc.is_object()) throw std::invalid_argument("script must be a list or an object");
  if (doc.contains("ordered") || doc.contains("keyed")) {
    if (doc.contains("ordered")) read_ordered(doc["ordered"]);
    if (doc.contains("keyed")) {
      const auto& keyed = doc["keyed"];
      if (!keyed.is_array()) throw std::invalid_argument("script 'keyed' must be a list");
      for (const auto& rule : keyed) {
        if (!rule.is_object() || !rule.contains("match") || !rule.contains("response") ||
            !rule["match"].is_string() || !rule["response"].is_string()) {
          throw std::invalid_argument("keyed rules need string 'match' and 'response'");
        }
        script.keyed.push_back({rule["match"].get<std::string>(), rule["response"].get<std::string>()});
      }
    }
    return script;
  }
  for (const auto& [match, response] : doc.items()) {
    if (!response.is_string()) throw std::invalid_argument("keyed responses must be strings");
    script.keyed.push_back({match, response.get<std::string>()});
  }
  return script;
}

Script load_script_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open script: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_script(buf.str());
}

void BackendConfig::validate() const {
  if (kind == Kind::http) {
    if (endpoint.empty()) throw std::invalid_argument("http backend needs an endpoint");
    if (model.empty()) throw std::invalid_argument("http backend needs a model name");
    if (max_attempts < 1) throw std::invalid_argument("max_attempts must be at least 1");
  } else if (!script) {
    throw std::invalid_argument("scripted backend needs a script");
  }
}

BackendConfig scripted_backend(std::vector<std::string> ordered, std::vector<ScriptRule> keyed) {
  BackendConfig config;
  config.kind = BackendConfig::Kind::scripted;
  config.script = std::make_shared<Script>(Script{std::move(ordered), std::move(keyed)});
  return config;
}

BackendConfig http_backend(std::string endpoint, std::string model) {
  BackendConfig config;
  config.kind = BackendConfig::Kind::http;
  config.endpoint = std::move(endpoint);
  config.model = std::move(model);
  return config;
}

// ---------------------------------------------------------------------------
// Exchange sink

namespace {

json messages_json(const std::vector<ChatMessage>& messages) {
  json out = json::array();
  for (const auto& m : messages) {
    out.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  return out;
}

}  // namespace

void JsonlExchangeSink::record(const std::vector<ChatMessage>& request, std::string_view response) {
  json line = {{"messages", messages_json(request)}, {"response", std::string(response)}};
  std::lock_guard lock(mutex_);
  out_ << line.dump() << '\n';
  out_.flush();
}

// ---------------------------------------------------------------------------
// Clients

std::string LlmClient::complete(const std::vector<ChatMessage>& messages) {
  if (max_context_chars_ != 0) {
    std::size_t total = 0;
    for (const auto& m : messages) total += m.content.size();
    if (total > max_context_chars_) {
      throw ContextOverflowError("request context of " + std::to_string(total) +
                                 " characters exceeds the limit of " +
                                 std::to_string(max_context_chars_));
    }
  }
  ++calls_;
  auto response = do_complete(messages);
  if (sink_) sink_->record(messages, response);
  return response;
}

namespace {

class ScriptedClient final : public LlmClient {
 public:
  ScriptedClient(std::shared_ptr<const Script> script, std::size_t max_chars,
                 std::shared_ptr<ExchangeSink> sink)
      : LlmClient(max_chars, std::move(sink)), script_(std::move(script)) {}

 protected:
  std::string do_complete(const std::vector<ChatMessage>& messages) override {
    std::string_view user;
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
      if (it->role == Role::user) {
        user = it->content;
        break;
      }
    }
    // Opening turn: system + one user message.
    const bool opening = messages.size() == 2 && messages.front().role == Role::system;
    for (const auto& rule : script_->keyed) {
      if (user.find(rule.match) != std::string_view::npos) return rule.response;
    }
    if (opening) {
      for (const auto& rule : script_->keyed) {
        if (messages.front().content.find(rule.match) != std::string::npos) return rule.response;
      }
    }
    if (cursor_ >= script_->ordered.size()) {
      throw ScriptExhaustedError("scripted backend exhausted after " +
                                 std::to_string(script_->ordered.size()) + " responses");
    }
    return script_->ordered[cursor_++];
  }

 private:
  std::shared_ptr<const Script> script_;
  std::size_t cursor_ = 0;
};

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint must be an absolute URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

struct CassetteRecord {
  std::string hash;
  std::string response;
};

class HttpClient final : public LlmClient {
 public:
  HttpClient(BackendConfig config, std::shared_ptr<ExchangeSink> sink)
      : LlmClient(config.max_context_chars, std::move(sink)), config_(std::move(config)) {
    if (config_.cassette_mode == CassetteMode::replay) load_cassette();
  }

 protected:
  std::string do_complete(const std::vector<ChatMessage>& messages) override {
    const auto body = chat_request_body(config_, messages);
    if (config_.cassette_mode == CassetteMode::replay) return replay(body);
    auto content = post(body);
    if (config_.cassette_mode == CassetteMode::record) append_cassette(body, content);
    return content;
  }

 private:
  std::string post(const std::string& body) {
    const auto url = split_url(config_.endpoint);
    httplib::Client cli(url.origin);
    cli.set_connection_timeout(config_.timeout);
    cli.set_read_timeout(config_.timeout);
    cli.set_write_timeout(config_.timeout);

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string last_error;
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(config_.retry_base_delay * (1 << (attempt - 1)));
      auto res = cli.Post(url.path, headers, body, "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        if (attempt + 1 == config_.max_attempts) throw ProtocolError(res->status, last_error + " after retries");
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw ProtocolError(res->status, "HTTP " + std::to_string(res->status) + ": " + res->body);
      }
      return extract_content(res->status, res->body);
    }
    throw TransportError(last_error + " after " + std::to_string(config_.max_attempts) + " attempts");
  }

  static std::string extract_content(int status, const std::string& body) {
    json doc;
    try {
      doc = json::parse(body);
      const auto& content = doc.at("choices").at(0).at("message").at("content");
      return content.get<std::string>();
    } catch (const json::exception& e) {
      throw ProtocolError(status, std::string("unexpected chat-completions reply: ") + e.what());
    }
  }

  void load_cassette() {
    std::ifstream in(config_.cassette_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open cassette: " + config_.cassette_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        auto rec = json::parse(line);
        cassette_.push_back({rec.at("request_hash").get<std::string>(), rec.at("response_text").get<std::string>()});
      } catch (const json::exception& e) {
        throw std::runtime_error("malformed cassette record: " + std::string(e.what()));
      }
    }
  }

  std::string replay(const std::string& body) {
    const auto hash = request_hash(body);
    for (auto it = cassette_.begin(); it != cassette_.end(); ++it) {
      if (it->hash == hash) {
        auto response = std::move(it->response);
        cassette_.erase(it);
        return response;
      }
    }
    throw CassetteMissError("no cassette record for request " + hash);
  }

  void append_cassette(const std::string& body, const std::string& content) {
    std::ofstream out(config_.cassette_path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot write cassette: " + config_.cassette_path);
    out << json{{"request_hash", request_hash(body)}, {"response_text", content}}.dump() << '\n';
  }

  BackendConfig config_;
  std::deque<CassetteRecord> cassette_;
};

}  // namespace

std::unique_ptr<LlmClient> make_client(const BackendConfig& config, std::shared_ptr<ExchangeSink> sink) {
  config.validate();
  if (config.kind == BackendConfig::Kind::scripted) {
    return std::make_unique<ScriptedClient>(config.script, config.max_context_chars, std::move(sink));
  }
  return std::make_unique<HttpClient>(config, std::move(sink));
}

std::string chat_request_body(const BackendConfig& config, const std::vector<ChatMessage>& messages) {
  ordered_json body;
  body["model"] = config.model;
  body["messages"] = ordered_json::array();
  for (const auto& m : messages) {
    body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  body["temperature"] = config.temperature;
  body["seed"] = config.seed;
  return body.dump();
}

std::string request_hash(std::string_view body) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(body.data(), body.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0f]);
  }
  return out;
}

std::string llm_response(LlmClient& client, std::string_view user_message,
                         std::string_view system_message, ChatHistory& history) {
  ChatHistory next = history;
  if (next.empty()) next.set_system(std::string(system_message));
  next.append_user(std::string(user_message));
  auto response = client.complete(next.messages());
  next.append_assistant(response);
  history = std::move(next);
  return response;
}

std::pair<std::string, ChatHistory> llm_response(LlmClient& client, std::string_view user_message,
                                                 std::string_view system_message,
                                                 std::optional<ChatHistory> history) {
  ChatHistory h = history ? std::move(*history) : ChatHistory{};
  auto response = llm_response(client, user_message, system_message, h);
  return {std::move(response), std::move(h)};
}

}  // namespace kgrag
