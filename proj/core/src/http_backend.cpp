#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "consortium/backends.hpp"
#include "consortium/errors.hpp"
#include "json_io.hpp"

namespace consortium {

using detail::json;
using Clock = std::chrono::steady_clock;

bool is_retriable_status(int status) {
  return status == 408 || status == 409 || status == 425 || status == 429 ||
         (status >= 500 && status <= 599);
}

std::string chat_request_body(const ModelSpec& spec, const std::string& prompt,
                              const SamplingParams& params) {
  json body = {{"model", spec.remote_model.empty() ? spec.id : spec.remote_model},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
               {"temperature", params.temperature},
               {"top_p", params.top_p},
               {"max_tokens", params.max_tokens}};
  return body.dump();
}

namespace {

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("endpoint '" + url + "' must start with http:// or https://");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

struct HttpBackend::Impl {
  ModelSpec spec;
  Endpoint endpoint;
  std::string api_key;

  std::mutex mu;
  std::condition_variable cv;
  int in_flight = 0;
  Clock::time_point next_slot = Clock::now();
  std::atomic<std::size_t> attempts{0};

  void acquire() {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return in_flight < spec.max_concurrency; });
    ++in_flight;
    if (spec.requests_per_minute > 0) {
      const auto interval = std::chrono::duration_cast<Clock::duration>(
          std::chrono::duration<double>(60.0 / spec.requests_per_minute));
      const auto slot = std::max(Clock::now(), next_slot);
      next_slot = slot + interval;
      lock.unlock();
      std::this_thread::sleep_until(slot);
    }
  }

  void release() {
    {
      std::lock_guard lock(mu);
      --in_flight;
    }
    cv.notify_one();
  }

  // One attempt. Throws BackendError classified as retriable or fatal.
  ResponseSample attempt(const Question& question, const SamplingParams& params, int sample_index,
                         const std::string& prompt) {
    ++attempts;
    httplib::Client client(endpoint.scheme_host_port);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(spec.timeout);
    client.set_write_timeout(spec.timeout);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    const auto start = Clock::now();
    acquire();
    auto res = client.Post(endpoint.path, headers, chat_request_body(spec, prompt, params),
                           "application/json");
    release();
    const double latency =
        std::chrono::duration<double, std::milli>(Clock::now() - start).count();

    if (!res)
      throw BackendError("transport failure talking to " + endpoint.scheme_host_port + ": " +
                             httplib::to_string(res.error()),
                         true);
    if (res->status < 200 || res->status >= 300) {
      std::string detail = res->body.substr(0, 200);
      BackendError err("HTTP " + std::to_string(res->status) + " from " + spec.id + ": " + detail,
                       is_retriable_status(res->status), res->status);
      throw err;
    }
    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::parse_error&) {
      throw BackendError("response from " + spec.id + " is not JSON", false, res->status);
    }
    ResponseSample s;
    s.model_id = spec.id;
    s.question_id = question.id;
    s.sample_index = sample_index;
    s.latency_ms = latency;
    try {
      s.text = body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw BackendError("response from " + spec.id + " has no choices[0].message.content", false,
                         res->status);
    }
    if (auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
      s.tokens_in = usage->value("prompt_tokens", estimate_tokens(prompt));
      s.tokens_out = usage->value("completion_tokens", estimate_tokens(s.text));
    } else {
      s.tokens_in = estimate_tokens(prompt);
      s.tokens_out = estimate_tokens(s.text);
    }
    return s;
  }
};

HttpBackend::HttpBackend(ModelSpec spec) : impl_(std::make_unique<Impl>()) {
  spec.validate();
  impl_->endpoint = split_endpoint(spec.endpoint);
  if (!spec.auth_env_var.empty()) {
    const char* key = std::getenv(spec.auth_env_var.c_str());
    if (key == nullptr || *key == '\0')
      throw ConfigError("model '" + spec.id + "': environment variable " + spec.auth_env_var +
                        " is not set");
    impl_->api_key = key;
  }
  impl_->spec = std::move(spec);
}

HttpBackend::~HttpBackend() = default;

const ModelSpec& HttpBackend::spec() const { return impl_->spec; }

std::size_t HttpBackend::attempts() const { return impl_->attempts.load(); }

ResponseSample HttpBackend::generate(const Question& question, const SamplingParams& params,
                                     int sample_index) {
  const std::string prompt = build_prompt(question, params);
  const auto& spec = impl_->spec;
  for (int attempt = 0;; ++attempt) {
    try {
      return impl_->attempt(question, params, sample_index, prompt);
    } catch (const BackendError& e) {
      if (!e.retriable()) throw;
      if (attempt >= spec.max_retries)
        throw BackendError(std::string(e.what()) + " (gave up after " +
                               std::to_string(attempt + 1) + " attempts)",
                           false, e.status());
      auto delay = spec.backoff_initial * (std::int64_t{1} << std::min(attempt, 20));
      std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(delay, spec.backoff_cap));
    }
  }
}

}  // namespace consortium
