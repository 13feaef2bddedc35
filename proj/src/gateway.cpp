#include "council/gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#ifdef COUNCIL_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

namespace council {

using json = nlohmann::json;

void ChatRequest::validate() const {
  if (system_prompt.empty()) throw Error("chat request needs a system prompt");
  if (temperature < 0.0) throw Error("temperature must be >= 0");
  if (max_output_tokens <= 0) throw Error("max_output_tokens must be positive");
  if (request_tag.empty()) throw Error("chat request needs a request_tag");
}

ScriptedBackendSpec ScriptedBackendSpec::from_jsonl(const std::string& text) {
  ScriptedBackendSpec spec;
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& ex) {
      throw ParseError(std::string("script: ") + ex.what(), line_no);
    }
    if (!record.is_object()) throw ParseError("script entry must be an object", line_no);
    if (record.contains("default")) {
      if (!record.at("default").is_string()) throw ParseError("default must be a string", line_no);
      spec.default_response = record.at("default").get<std::string>();
      continue;
    }
    ScriptEntry entry;
    if (record.contains("tag")) entry.tag = record.at("tag").get<std::string>();
    if (record.contains("ordinal")) entry.ordinal = record.at("ordinal").get<std::size_t>();
    if (entry.tag.has_value() == entry.ordinal.has_value()) {
      throw ParseError("script entry needs exactly one of tag/ordinal", line_no);
    }
    if (!record.contains("response") || !record.at("response").is_string()) {
      throw ParseError("script entry needs a string response", line_no);
    }
    entry.response = record.at("response").get<std::string>();
    spec.entries.push_back(std::move(entry));
  }
  return spec;
}

ScriptedBackendSpec ScriptedBackendSpec::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open script file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_jsonl(buffer.str());
}

ScriptedBackendSpec load_script(const std::string& path) { return ScriptedBackendSpec::load_file(path); }

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
  request.validate();
  const std::string run_id = request.request_tag.substr(0, request.request_tag.find('/'));

  std::lock_guard<std::mutex> lock(mutex_);
  const std::size_t position = position_by_run_[run_id]++;

  for (const ScriptEntry& entry : spec_.entries) {
    if (entry.tag && *entry.tag == request.request_tag) {
      return {entry.response, id(), std::nullopt};
    }
  }
  for (const ScriptEntry& entry : spec_.entries) {
    if (entry.ordinal && *entry.ordinal == position) {
      return {entry.response, id(), std::nullopt};
    }
  }
  if (spec_.default_response) {
    return {*spec_.default_response, id(), std::nullopt};
  }
  throw ScriptExhaustedError("no script entry for tag '" + request.request_tag + "' (position " +
                             std::to_string(position) + " in run '" + run_id + "')");
}

namespace {

class HttplibTransport : public HttpTransport {
 public:
  explicit HttplibTransport(std::string base_url) : base_url_(std::move(base_url)) {}

  HttpResult post_json(const std::string& path, const std::string& body,
                       const std::vector<std::pair<std::string, std::string>>& headers) override {
    // one client per request; httplib clients are not safe to share across threads
    httplib::Client client(base_url_);
    client.set_connection_timeout(30, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers hdrs;
    for (const auto& [name, value] : headers) hdrs.emplace(name, value);
    auto res = client.Post(path, hdrs, body, "application/json");
    if (!res) {
      return {0, "", httplib::to_string(res.error())};
    }
    return {res->status, res->body, ""};
  }

 private:
  std::string base_url_;
};

bool retryable_status(int status) {
  return status == 0 || status == 408 || status == 409 || status == 429 || status >= 500;
}

std::string read_env(const char* name) {
  const char* value = std::getenv(name);
  return value ? value : "";
}

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport(const std::string& base_url) {
  return std::make_unique<HttplibTransport>(base_url);
}

LiveBackend::LiveBackend(LiveBackendOptions options, std::unique_ptr<HttpTransport> transport,
                         std::function<void(std::chrono::milliseconds)> sleeper)
    : options_(std::move(options)),
      transport_(transport ? std::move(transport) : make_httplib_transport(options_.base_url)),
      sleeper_(sleeper ? std::move(sleeper)
                       : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (options_.api_key.empty()) {
    options_.api_key = read_env(kApiKeyEnv);
    if (options_.api_key.empty()) options_.api_key = read_env(kApiKeyEnvFallback);
  }
}

ChatResponse LiveBackend::complete(const ChatRequest& request) {
  request.validate();
  if (options_.api_key.empty()) {
    throw AuthMissingError(std::string("no API credential; set ") + kApiKeyEnv);
  }

  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  for (const auto& [speaker, text] : request.messages) {
    const std::string role = (speaker == "assistant") ? "assistant" : "user";
    messages.push_back({{"role", role}, {"content", text}});
  }
  const json body{
      {"model", options_.model},
      {"messages", std::move(messages)},
      {"temperature", request.temperature},
      {"max_tokens", request.max_output_tokens},
  };
  const std::string payload = body.dump();
  const std::vector<std::pair<std::string, std::string>> headers{
      {"Authorization", "Bearer " + options_.api_key},
  };

  std::string last_failure;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto factor = std::pow(options_.backoff_factor, attempt - 1);
      sleeper_(std::chrono::milliseconds(
          static_cast<long>(static_cast<double>(options_.backoff_base.count()) * factor)));
    }
    const HttpResult result = transport_->post_json(options_.path, payload, headers);
    if (result.status == 200) {
      try {
        const json doc = json::parse(result.body);
        ChatResponse response;
        response.text = doc.at("choices").at(0).at("message").value("content", "");
        response.backend_id = id();
        if (doc.contains("usage")) {
          ChatUsage usage;
          usage.prompt_tokens = doc.at("usage").value("prompt_tokens", 0L);
          usage.completion_tokens = doc.at("usage").value("completion_tokens", 0L);
          response.usage = usage;
        }
        return response;
      } catch (const json::exception& ex) {
        throw ProviderError(std::string("malformed completion response: ") + ex.what(), 200);
      }
    }
    if (!retryable_status(result.status)) {
      throw ProviderError("provider returned HTTP " + std::to_string(result.status) + ": " + result.body,
                          result.status);
    }
    last_failure = result.status == 0 ? result.error : "HTTP " + std::to_string(result.status);
  }
  throw RetriesExhaustedError("request '" + request.request_tag + "' failed after " +
                              std::to_string(options_.max_retries + 1) + " attempts (" + last_failure + ")");
}

}  // namespace council
