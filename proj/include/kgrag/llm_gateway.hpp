#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kgrag {

enum class Role { system, user, assistant };

std::string_view role_name(Role role);
Role parse_role(std::string_view name);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// Chat-completions message list. At most one system message, always first;
/// after it user and assistant turns strictly alternate. Append-only.
class ChatHistory {
 public:
  ChatHistory() = default;

  /// Only valid on an empty history.
  void set_system(std::string content);
  void append_user(std::string content);
  void append_assistant(std::string content);

  const std::vector<ChatMessage>& messages() const { return messages_; }
  std::size_t size() const { return messages_.size(); }
  bool empty() const { return messages_.empty(); }
  bool has_system() const { return !messages_.empty() && messages_.front().role == Role::system; }

  /// Content of the latest assistant message, or empty if there is none.
  std::string last_assistant() const;

  friend bool operator==(const ChatHistory&, const ChatHistory&) = default;

 private:
  std::vector<ChatMessage> messages_;
};

// ---------------------------------------------------------------------------
// Errors

class LlmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Connection-level failure after all retries.
class TransportError : public LlmError {
 public:
  using LlmError::LlmError;
};

/// Non-2xx reply, or a 2xx reply without choices[0].message.content.
class ProtocolError : public LlmError {
 public:
  ProtocolError(int status, const std::string& what) : LlmError(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// A scripted backend ran out of responses.
class ScriptExhaustedError : public LlmError {
 public:
  using LlmError::LlmError;
};

/// The request exceeds the configured context budget. Nothing is truncated.
class ContextOverflowError : public LlmError {
 public:
  using LlmError::LlmError;
};

/// Cassette replay found no recorded response for the request.
class CassetteMissError : public LlmError {
 public:
  using LlmError::LlmError;
};

// ---------------------------------------------------------------------------
// Backend configuration

struct ScriptRule {
  std::string match;
  std::string response;

  friend bool operator==(const ScriptRule&, const ScriptRule&) = default;
};

/// Canned responses. Keyed rules are tried first (first match wins); they
/// match by substring against the latest user message, and on the opening
/// turn of a dialog also against the system message. Otherwise the next
/// ordered response is consumed.
struct Script {
  std::vector<std::string> ordered;
  std::vector<ScriptRule> keyed;
};

/// Loads a script file: a JSON list of strings (ordered), an object of
/// match -> response (keyed, document order) or
/// {"ordered": [...], "keyed": [{"match": ..., "response": ...}]}.
Script parse_script(std::string_view document);
Script load_script_file(const std::string& path);

enum class CassetteMode { off, record, replay };

struct BackendConfig {
  enum class Kind { http, scripted };

  Kind kind = Kind::scripted;

  // http
  std::string endpoint;
  std::string model;
  double temperature = 1.0;
  std::int64_t seed = 42;
  std::string api_key_env = "LLM_API_KEY";
  int max_attempts = 3;
  std::chrono::milliseconds retry_base_delay{500};
  std::chrono::seconds timeout{120};
  std::string cassette_path;
  CassetteMode cassette_mode = CassetteMode::off;

  // scripted
  std::shared_ptr<const Script> script = std::make_shared<Script>();

  // Total characters across all messages of one request; 0 disables.
  std::size_t max_context_chars = 0;

  /// Throws std::invalid_argument when an http config lacks endpoint or model.
  void validate() const;
};

BackendConfig scripted_backend(std::vector<std::string> ordered, std::vector<ScriptRule> keyed = {});
BackendConfig http_backend(std::string endpoint, std::string model);

// ---------------------------------------------------------------------------
// Exchange logging

/// Receives every request/response pair a client sends.
class ExchangeSink {
 public:
  virtual ~ExchangeSink() = default;
  virtual void record(const std::vector<ChatMessage>& request, std::string_view response) = 0;
};

/// Writes one JSON object per exchange: {"messages": [...], "response": "..."}.
class JsonlExchangeSink final : public ExchangeSink {
 public:
  explicit JsonlExchangeSink(std::ostream& out) : out_(out) {}
  void record(const std::vector<ChatMessage>& request, std::string_view response) override;

 private:
  std::mutex mutex_;
  std::ostream& out_;
};

// ---------------------------------------------------------------------------
// Clients

/// One dialog's connection to a backend. Not thread-safe; create one client
/// per session. Scripted clients start from the beginning of their script.
class LlmClient {
 public:
  virtual ~LlmClient() = default;

  /// Sends the full message list and returns the assistant content.
  std::string complete(const std::vector<ChatMessage>& messages);

  std::size_t calls() const { return calls_; }

 protected:
  LlmClient(std::size_t max_context_chars, std::shared_ptr<ExchangeSink> sink)
      : max_context_chars_(max_context_chars), sink_(std::move(sink)) {}

  virtual std::string do_complete(const std::vector<ChatMessage>& messages) = 0;

 private:
  std::size_t max_context_chars_;
  std::shared_ptr<ExchangeSink> sink_;
  std::size_t calls_ = 0;
};

std::unique_ptr<LlmClient> make_client(const BackendConfig& config,
                                       std::shared_ptr<ExchangeSink> sink = nullptr);

/// Serialized chat-completions request body for `messages`.
std::string chat_request_body(const BackendConfig& config, const std::vector<ChatMessage>& messages);

/// Hex SHA-256 of a request body, as stored in cassettes.
std::string request_hash(std::string_view body);

/// Sends `user_message` within `history`. An empty history is first seeded
/// with `system_message`. On success the user message and the response are
/// appended and the response is returned; on failure the history is left
/// untouched.
std::string llm_response(LlmClient& client, std::string_view user_message,
                         std::string_view system_message, ChatHistory& history);

/// Value-returning form: a missing history starts a fresh one.
std::pair<std::string, ChatHistory> llm_response(LlmClient& client, std::string_view user_message,
                                                 std::string_view system_message,
                                                 std::optional<ChatHistory> history);

}  // namespace kgrag
