#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "council/errors.hpp"

namespace council {

struct ChatRequest {
  std::string system_prompt;
  std::vector<std::pair<std::string, std::string>> messages;  // (speaker_tag, text)
  double temperature = 0.7;
  int max_output_tokens = 1024;
  std::string request_tag;  // "{run_id}/{round}/{role}/{purpose}"

  void validate() const;
};

struct ChatUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  std::string backend_id;
  std::optional<ChatUsage> usage;
};

// Uniform chat-completion interface. Implementations must accept concurrent
// in-flight requests from parallel runs.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
};

struct ScriptEntry {
  std::optional<std::string> tag;        // exact request_tag match
  std::optional<std::size_t> ordinal;    // position in the run's request sequence
  std::string response;
};

struct ScriptedBackendSpec {
  std::vector<ScriptEntry> entries;
  std::optional<std::string> default_response;

  static ScriptedBackendSpec from_jsonl(const std::string& text);
  static ScriptedBackendSpec load_file(const std::string& path);
};

ScriptedBackendSpec load_script(const std::string& path);

// Deterministic backend: exact tag match first, then ordinal position within
// the requesting run (the tag segment before the first '/'), then the default.
// Ordinal positions are counted per run so parallel runs never interleave
// each other's scripts.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(ScriptedBackendSpec spec) : spec_(std::move(spec)) {}

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "scripted"; }

 private:
  ScriptedBackendSpec spec_;
  std::mutex mutex_;
  std::map<std::string, std::size_t> position_by_run_;
};

struct HttpResult {
  int status = 0;  // 0 = transport failure
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post_json(const std::string& path, const std::string& body,
                               const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

std::unique_ptr<HttpTransport> make_httplib_transport(const std::string& base_url);

struct LiveBackendOptions {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key;  // taken from the environment when empty
  int max_retries = 2;  // total attempts = max_retries + 1
  std::chrono::milliseconds backoff_base{500};
  double backoff_factor = 2.0;
};

// Environment variables consulted for the live credential, in order.
inline constexpr const char* kApiKeyEnv = "COUNCIL_API_KEY";
inline constexpr const char* kApiKeyEnvFallback = "OPENAI_API_KEY";

class LiveBackend : public ChatBackend {
 public:
  explicit LiveBackend(LiveBackendOptions options, std::unique_ptr<HttpTransport> transport = nullptr,
                       std::function<void(std::chrono::milliseconds)> sleeper = nullptr);

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "live:" + options_.model; }

 private:
  LiveBackendOptions options_;
  std::unique_ptr<HttpTransport> transport_;
  std::function<void(std::chrono::milliseconds)> sleeper_;
};

}  // namespace council
