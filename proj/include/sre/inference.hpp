#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sre/dataset.hpp"
#include "sre/policy.hpp"
#include "sre/prompts.hpp"

namespace sre {

struct GenerationRequest {
  PromptBundle bundle;
  int n = 10;
  double temperature = 1.0;
  int max_tokens = 1024;
  std::optional<std::uint64_t> seed;  // honored by mock/toy backends only
  std::string item_id;
  /// The toy backend featurizes the item itself rather than the prompt text.
  std::optional<EvaluationItem> item;
  /// For meta-judge requests: the score of the judgment being rated.
  std::optional<int> judged_score;

  void validate() const;
};

struct HttpBackendConfig {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string model_name;
  std::string api_key_env_var = "OPENAI_API_KEY";
  double timeout_seconds = 120.0;
  int max_retries = 3;
  int max_concurrent_requests = 8;
  int retry_base_ms = 500;
};

struct MockBackendConfig {
  std::filesystem::path script_path;
};

struct ToyBackendConfig {
  std::filesystem::path policy_path;
  std::string rationale_template_id = "default";
};

struct BackendConfig {
  std::variant<HttpBackendConfig, MockBackendConfig, ToyBackendConfig> settings;

  std::string_view kind() const;
  int max_concurrent() const;
};

Json to_json(const BackendConfig& c);
BackendConfig backend_config_from_json(const Json& j);

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  /// Exactly request.n texts, or throws BackendError. Must be safe to call concurrently.
  virtual std::vector<std::string> generate(const GenerationRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Replays a JSONL script of {"match": item_id | "*", "texts": [...]} or {"match": ..., "error": "..."}.
/// Entries for an exact item id are consumed in file order before any "*" entry.
class MockBackend : public JudgeBackend {
 public:
  struct Entry {
    std::vector<std::string> texts;
    std::optional<std::string> error;
  };

  explicit MockBackend(const std::filesystem::path& script_path);
  explicit MockBackend(std::vector<std::pair<std::string, Entry>> script);

  std::vector<std::string> generate(const GenerationRequest& request) override;
  std::string name() const override { return "mock"; }

 private:
  std::mutex mutex_;
  std::map<std::string, std::vector<Entry>> by_item_;
  std::map<std::string, std::size_t> next_;
};

/// Samples scores from a ToyPolicy and emits "<templated rationale> [RESULT] <score>".
/// Per-sample seeds are derive_seed(request.seed, item_id, sample_index).
class ToyBackend : public JudgeBackend {
 public:
  ToyBackend(ToyPolicy policy, std::string rationale_template_id = "default");

  std::vector<std::string> generate(const GenerationRequest& request) override;
  std::string name() const override { return "toy"; }
  const ToyPolicy& policy() const { return policy_; }

 private:
  ToyPolicy policy_;
  std::string template_id_;
};

/// OpenAI-style chat-completions client. Retries timeouts, 5xx and 429 with exponential backoff.
class HttpBackend : public JudgeBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::vector<std::string> generate(const GenerationRequest& request) override;
  std::string name() const override { return "http:" + config_.model_name; }

 private:
  std::vector<std::string> request_once(const GenerationRequest& request, int n);

  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

std::unique_ptr<JudgeBackend> make_backend(const BackendConfig& config);

/// One-shot convenience: builds the backend and runs a single request.
std::vector<std::string> generate(const BackendConfig& backend, const GenerationRequest& request);

struct BatchSlot {
  std::vector<std::string> texts;
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
};

/// Bounded fan-out: at most `max_concurrent` requests in flight; slot i always holds request i.
/// A failing request fills its slot's error without aborting the rest.
std::vector<BatchSlot> generate_batch(JudgeBackend& backend, const std::vector<GenerationRequest>& requests,
                                      int max_concurrent);

/// Rationale text the toy backend emits for (item, score). Known ids: "default", "terse".
std::string toy_rationale(std::string_view template_id, std::string_view item_id, TaskType task, int score);
std::string toy_judgment_text(std::string_view template_id, std::string_view item_id, TaskType task, int score);

}  // namespace sre
