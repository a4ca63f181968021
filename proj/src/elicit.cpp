#include "epimark/elicit.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <spdlog/spdlog.h>

#include "epimark/json_io.hpp"

namespace epimark::elicit {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

std::string render_prompt(const QAItem& item, PromptMode mode) {
  const bool binary = item.question_type == QuestionType::binary;
  const std::string_view kind = binary ? "a binary question" : "a multiple choice question";
  const std::string_view answer_with = binary ? "a binary answer" : "a letter";
  const std::string_view include = binary ? "your binary answer" : "your choice of letter";
  const std::string_view channel =
      mode == PromptMode::marker ? "only one epistemic marker" : "a number between 0 and 100";
  const std::string_view respond_with = mode == PromptMode::marker ? "the epistemic markers" : "the confidence score";

  std::string choices;
  if (binary) {
    choices = "yes or no";
  } else {
    for (std::size_t i = 0; i < item.options.size(); ++i) {
      if (i) choices += ", ";
      choices += item.options[i].letter;
    }
  }

  std::string out;
  out += "The following is ";
  out += kind;
  out += ". When responding, answer with ";
  out += answer_with;
  out += " from " + choices + " and incorporate ";
  out += channel;
  out += " to reflect your confidence level. You must include ";
  out += include;
  out += " at the beginning of your response then respond with ";
  out += respond_with;
  out += " in a concise and brief manner.\n";
  out += "The question is: " + item.question_text + "\n";
  if (!binary) {
    out += "The options are:\n";
    for (const auto& o : item.options) out += o.letter + ". " + o.text + "\n";
  }
  out += "And your answer is:";
  return out;
}

void check_request(const ElicitationRequest& r) {
  if (!(r.temperature >= 0.0 && r.temperature <= 2.0)) throw UsageError("temperature must lie in [0, 2]");
  if (r.max_tokens <= 0) throw UsageError("max_tokens must be positive");
  if (r.model_id.empty()) throw UsageError("model_id is required");
}

ClientConfig client_config_from_json(const json& j, ClientConfig c) {
  if (!j.is_object()) throw UsageError("client config must be a JSON object");
  try {
    c.endpoint_url = j.value("endpoint_url", c.endpoint_url);
    c.model_id = j.value("model_id", c.model_id);
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.max_inflight = j.value("max_inflight", c.max_inflight);
    c.requests_per_minute = j.value("requests_per_minute", c.requests_per_minute);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.backoff_initial = std::chrono::milliseconds(j.value("backoff_initial_ms", c.backoff_initial.count()));
    c.backoff_max = std::chrono::milliseconds(j.value("backoff_max_ms", c.backoff_max.count()));
    c.timeout = std::chrono::seconds(j.value("timeout_s", c.timeout.count()));
    if (auto it = j.find("cache_dir"); it != j.end()) c.cache_dir = it->get<std::string>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad client config: ") + e.what());
  }
  if (c.max_inflight < 1) throw UsageError("max_inflight must be >= 1");
  if (c.max_retries < 0) throw UsageError("max_retries must be >= 0");
  return c;
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

std::string cache_key(std::string_view model_id, std::string_view prompt, double temperature, int max_tokens) {
  const std::string canonical = json::array({model_id, prompt, temperature, max_tokens}).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

fs::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CachedCompletion> ResponseCache::get(const std::string& key) const {
  const fs::path p = path_for(key);
  if (!fs::exists(p)) return std::nullopt;
  json j;
  try {
    j = json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw DataError("corrupt cache entry " + p.string() + ": " + e.what());
  }
  CachedCompletion c{j.at("cache_key").get<std::string>(), j.at("raw_response").get<std::string>(),
                     j.value("endpoint_metadata", std::string{})};
  if (c.cache_key != key) throw DataError("cache entry " + p.string() + " holds a different key");
  return c;
}

void ResponseCache::put(const CachedCompletion& entry) const {
  json j{{"cache_key", entry.cache_key},
         {"raw_response", entry.raw_response},
         {"endpoint_metadata", entry.endpoint_metadata}};
  write_file_atomic(path_for(entry.cache_key), j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

namespace {

bool is_transient(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

}  // namespace

Client::Client(ClientConfig config, Transport& transport, Sleeper sleeper, CredentialSource credential)
    : config_(std::move(config)),
      transport_(transport),
      sleeper_(std::move(sleeper)),
      credential_(std::move(credential)),
      cache_(config_.cache_dir),
      inflight_(std::make_unique<std::counting_semaphore<>>(std::max(1, config_.max_inflight))) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!credential_) {
    credential_ = [env = config_.api_key_env]() -> std::optional<std::string> {
      const char* v = std::getenv(env.c_str());
      if (v == nullptr || *v == '\0') return std::nullopt;
      return std::string(v);
    };
  }
}

std::string Client::complete(const ElicitationRequest& request) {
  check_request(request);
  return complete_prompt(render_prompt(request.item, request.prompt_mode), request.model_id, request.temperature,
                         request.max_tokens);
}

std::string Client::complete_prompt(const std::string& prompt, const std::string& model_id, double temperature,
                                    int max_tokens) {
  const std::string key = cache_key(model_id, prompt, temperature, max_tokens);
  if (auto hit = cache_.get(key)) {
    ++cache_hits_;
    return hit->raw_response;
  }
  CachedCompletion fresh = fetch(key, prompt, model_id, temperature, max_tokens);
  cache_.put(fresh);
  return fresh.raw_response;
}

void Client::pace() {
  if (config_.requests_per_minute <= 0.0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(60.0 / config_.requests_per_minute));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(pace_mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(slot - std::chrono::steady_clock::now());
  if (wait.count() > 0) sleeper_(wait);
}

CachedCompletion Client::fetch(const std::string& key, const std::string& prompt, const std::string& model_id,
                               double temperature, int max_tokens) {
  const auto credential = credential_();
  if (!credential)
    throw AuthenticationError("no API key: set the " + config_.api_key_env + " environment variable");

  const json body{{"model", model_id},
                  {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
                  {"temperature", temperature},
                  {"max_tokens", max_tokens}};
  const std::string payload = body.dump();
  const std::vector<std::pair<std::string, std::string>> headers{{"Authorization", "Bearer " + *credential}};

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      ++retries_;
      auto delay = config_.backoff_initial * (std::int64_t{1} << std::min(attempt - 1, 20));
      sleeper_(std::min(delay, config_.backoff_max));
    }
    pace();
    HttpResponse resp;
    {
      inflight_->acquire();
      ++network_calls_;
      try {
        resp = transport_.post_json(config_.endpoint_url, payload, headers);
      } catch (...) {
        inflight_->release();
        throw;
      }
      inflight_->release();
    }

    if (resp.status == 401 || resp.status == 403)
      throw AuthenticationError("endpoint rejected the credential (HTTP " + std::to_string(resp.status) + ")");
    if (is_transient(resp.status)) {
      last_error = resp.status == 0 ? "connection failed: " + resp.error : "HTTP " + std::to_string(resp.status);
      spdlog::warn("transient endpoint failure ({}), attempt {}/{}", last_error, attempt + 1, config_.max_retries + 1);
      continue;
    }
    if (resp.status < 200 || resp.status >= 300)
      throw EndpointError("endpoint returned HTTP " + std::to_string(resp.status) + ": " + resp.body.substr(0, 200));

    try {
      const json j = json::parse(resp.body);
      const auto& msg = j.at("choices").at(0).at("message");
      std::string content = msg.at("content").is_null() ? std::string{} : msg.at("content").get<std::string>();
      json meta = json::object();
      for (const char* k : {"id", "model", "usage"})
        if (j.contains(k)) meta[k] = j[k];
      if (j["choices"][0].contains("finish_reason")) meta["finish_reason"] = j["choices"][0]["finish_reason"];
      return {key, std::move(content), meta.dump()};
    } catch (const json::exception& e) {
      throw SchemaMismatchError(std::string("response is not a chat completion: ") + e.what());
    }
  }
  throw RetryExhaustedError("gave up after " + std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

std::vector<ResponseRecord> generate_responses(std::span<const QAItem> items, PromptMode mode, Client& client) {
  const auto& cfg = client.config();
  std::vector<ResponseRecord> out(items.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      try {
        ElicitationRequest req{items[i], mode, cfg.model_id, cfg.temperature, cfg.max_tokens};
        ResponseRecord rec;
        rec.item = {items[i].dataset_id, items[i].split, items[i].item_id};
        rec.model_id = cfg.model_id;
        rec.prompt_mode = mode;
        rec.temperature = cfg.temperature;
        rec.raw_response = client.complete(req);
        out[i] = std::move(rec);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const auto n_workers = static_cast<std::size_t>(std::max(1, cfg.max_inflight));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(n_workers, std::max<std::size_t>(items.size(), 1)); ++w)
      pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace epimark::elicit
