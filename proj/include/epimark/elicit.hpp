#pragma once

// Prompt rendering and a cached, retrying client for OpenAI-compatible
// chat-completion endpoints.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "epimark/core.hpp"

namespace epimark::elicit {

// ---------------------------------------------------------------------------
// Errors. All endpoint failures exit the CLI with code 3.
// ---------------------------------------------------------------------------

class EndpointError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 3; }
};

/// Missing or rejected credential.
class AuthenticationError : public EndpointError {
 public:
  using EndpointError::EndpointError;
};

/// Every attempt failed with a transient error.
class RetryExhaustedError : public EndpointError {
 public:
  using EndpointError::EndpointError;
};

/// A 2xx reply whose body is not a chat-completion object.
class SchemaMismatchError : public EndpointError {
 public:
  using EndpointError::EndpointError;
};

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

/// Renders the elicitation prompt for `item`. Pure in (item, mode).
std::string render_prompt(const QAItem& item, PromptMode mode);

// ---------------------------------------------------------------------------
// Requests and configuration
// ---------------------------------------------------------------------------

inline constexpr double kDefaultTemperature = 0.5;
inline constexpr int kDefaultMaxTokens = 128;

struct ElicitationRequest {
  QAItem item;
  PromptMode prompt_mode = PromptMode::marker;
  std::string model_id;
  double temperature = kDefaultTemperature;
  int max_tokens = kDefaultMaxTokens;
};

/// Throws UsageError when temperature is outside [0,2] or max_tokens <= 0.
void check_request(const ElicitationRequest& request);

struct ClientConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model_id;
  double temperature = kDefaultTemperature;
  int max_tokens = kDefaultMaxTokens;
  int max_inflight = 4;
  double requests_per_minute = 0.0;  // 0 disables pacing
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 5;
  std::chrono::milliseconds backoff_initial{500};
  std::chrono::milliseconds backoff_max{30000};
  std::chrono::seconds timeout{120};
  std::filesystem::path cache_dir = "cache";
};

/// Reads the known keys of a JSON config object; unknown keys are ignored.
ClientConfig client_config_from_json(const nlohmann::json& j, ClientConfig base = {});

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

struct CachedCompletion {
  std::string cache_key;
  std::string raw_response;
  std::string endpoint_metadata;
  friend bool operator==(const CachedCompletion&, const CachedCompletion&) = default;
};

/// Hex SHA-256 over the canonical JSON encoding of the four inputs.
std::string cache_key(std::string_view model_id, std::string_view prompt, double temperature, int max_tokens);

/// Content-addressed completion store: `<dir>/<key[0:2]>/<key>.json`.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::optional<CachedCompletion> get(const std::string& key) const;
  /// Atomic (temp file + rename); concurrent writers of one key are safe.
  void put(const CachedCompletion& entry) const;
  std::filesystem::path path_for(const std::string& key) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

struct HttpResponse {
  int status = 0;  // 0: the request never got a response
  std::string body;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post_json(const std::string& url, const std::string& body,
                                 const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

/// HTTP(S) transport backed by cpp-httplib.
std::unique_ptr<Transport> make_http_transport(std::chrono::seconds timeout);

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

using Sleeper = std::function<void(std::chrono::milliseconds)>;
using CredentialSource = std::function<std::optional<std::string>()>;

/// Thread-safe. Cache hits never touch the transport or the credential.
class Client {
 public:
  Client(ClientConfig config, Transport& transport, Sleeper sleeper = {}, CredentialSource credential = {});

  std::string complete(const ElicitationRequest& request);
  std::string complete_prompt(const std::string& prompt, const std::string& model_id, double temperature,
                              int max_tokens);

  const ClientConfig& config() const { return config_; }
  std::size_t network_calls() const { return network_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }
  std::size_t retries() const { return retries_.load(); }

 private:
  CachedCompletion fetch(const std::string& key, const std::string& prompt, const std::string& model_id,
                         double temperature, int max_tokens);
  void pace();

  ClientConfig config_;
  Transport& transport_;
  Sleeper sleeper_;
  CredentialSource credential_;
  ResponseCache cache_;
  std::unique_ptr<std::counting_semaphore<>> inflight_;
  std::mutex pace_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> retries_{0};
};

/// Elicits one response per item, running up to `config.max_inflight`
/// requests at a time. Output order matches `items`; extraction fields are
/// left unset.
std::vector<ResponseRecord> generate_responses(std::span<const QAItem> items, PromptMode mode, Client& client);

}  // namespace epimark::elicit
