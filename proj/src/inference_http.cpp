#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "httplib.h"
#include "sre/error.hpp"
#include "sre/inference.hpp"

namespace sre {

namespace {

std::chrono::milliseconds backoff_delay(int base_ms, int attempt) {
  thread_local std::mt19937 jitter_rng{std::random_device{}()};
  std::uniform_real_distribution<double> jitter(0.0, 0.5);
  const double ms = base_ms * std::ldexp(1.0, attempt) * (1.0 + jitter(jitter_rng));
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const std::string& url = config_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("http backend: base_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::vector<std::string> HttpBackend::request_once(const GenerationRequest& request, int n) {
  Json body{{"model", config_.model_name},
            {"messages", Json::array({Json{{"role", "system"}, {"content", request.bundle.system}},
                                      Json{{"role", "user"}, {"content", request.bundle.user}}})},
            {"temperature", request.temperature},
            {"n", n},
            {"max_tokens", request.max_tokens}};
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env_var.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(config_.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const std::string path = path_prefix_ + "/chat/completions";
  std::string last_failure;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      Json parsed;
      try {
        parsed = Json::parse(res->body);
        std::vector<std::string> texts;
        for (const auto& choice : parsed.at("choices")) {
          texts.push_back(choice.at("message").at("content").get<std::string>());
        }
        return texts;
      } catch (const Json::exception& e) {
        throw BackendError(std::string("http backend: malformed response payload: ") + e.what());
      }
    } else if (res->status == 429 || res->status >= 500) {
      last_failure = "HTTP " + std::to_string(res->status);
    } else {
      throw BackendError("http backend: request rejected with HTTP " + std::to_string(res->status));
    }
    if (attempt < config_.max_retries) std::this_thread::sleep_for(backoff_delay(config_.retry_base_ms, attempt));
  }
  throw BackendError("http backend: endpoint unreachable after " + std::to_string(config_.max_retries + 1) +
                     " attempts (" + last_failure + ")");
}

std::vector<std::string> HttpBackend::generate(const GenerationRequest& request) {
  request.validate();
  std::vector<std::string> texts;
  while (static_cast<int>(texts.size()) < request.n) {
    auto batch = request_once(request, request.n - static_cast<int>(texts.size()));
    if (batch.empty()) throw BackendError("http backend: response contained no choices");
    for (auto& t : batch) {
      if (static_cast<int>(texts.size()) < request.n) texts.push_back(std::move(t));
    }
  }
  return texts;
}

}  // namespace sre
