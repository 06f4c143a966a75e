#include "sre/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

#include "sre/error.hpp"
#include "sre/hashing.hpp"

namespace sre {

void GenerationRequest::validate() const {
  if (n < 1) throw ValidationError("generation request: n must be >= 1");
  if (!(temperature >= 0.0)) throw ValidationError("generation request: temperature must be >= 0");
  if (max_tokens < 1) throw ValidationError("generation request: max_tokens must be >= 1");
}

std::string_view BackendConfig::kind() const {
  if (std::holds_alternative<HttpBackendConfig>(settings)) return "http";
  if (std::holds_alternative<MockBackendConfig>(settings)) return "mock";
  return "toy";
}

int BackendConfig::max_concurrent() const {
  if (auto http = std::get_if<HttpBackendConfig>(&settings)) return std::max(1, http->max_concurrent_requests);
  return 1;
}

Json to_json(const BackendConfig& c) {
  Json j{{"kind", c.kind()}};
  if (auto http = std::get_if<HttpBackendConfig>(&c.settings)) {
    j["http"] = Json{{"base_url", http->base_url},
                     {"model_name", http->model_name},
                     {"api_key_env_var", http->api_key_env_var},
                     {"timeout", http->timeout_seconds},
                     {"max_retries", http->max_retries},
                     {"max_concurrent_requests", http->max_concurrent_requests},
                     {"retry_base_ms", http->retry_base_ms}};
  } else if (auto mock = std::get_if<MockBackendConfig>(&c.settings)) {
    j["mock"] = Json{{"script_path", mock->script_path.string()}};
  } else {
    const auto& toy = std::get<ToyBackendConfig>(c.settings);
    j["toy"] = Json{{"policy_path", toy.policy_path.string()}, {"rationale_template_id", toy.rationale_template_id}};
  }
  return j;
}

BackendConfig backend_config_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  int populated = 0;
  for (const char* k : {"http", "mock", "toy"}) populated += j.contains(k) ? 1 : 0;
  if (populated > 1) throw ValidationError("backend config: exactly one of http/mock/toy may be populated");
  BackendConfig c;
  if (kind == "http") {
    const Json& h = j.at("http");
    HttpBackendConfig http;
    http.base_url = h.at("base_url").get<std::string>();
    http.model_name = h.at("model_name").get<std::string>();
    http.api_key_env_var = h.value("api_key_env_var", http.api_key_env_var);
    http.timeout_seconds = h.value("timeout", http.timeout_seconds);
    http.max_retries = h.value("max_retries", http.max_retries);
    http.max_concurrent_requests = h.value("max_concurrent_requests", http.max_concurrent_requests);
    http.retry_base_ms = h.value("retry_base_ms", http.retry_base_ms);
    if (http.max_retries < 0 || http.max_concurrent_requests < 1 || !(http.timeout_seconds > 0)) {
      throw ValidationError("backend config: invalid http settings");
    }
    c.settings = http;
  } else if (kind == "mock") {
    c.settings = MockBackendConfig{j.at("mock").at("script_path").get<std::string>()};
  } else if (kind == "toy") {
    ToyBackendConfig toy;
    if (j.contains("toy")) {
      const Json& t = j.at("toy");
      toy.policy_path = t.value("policy_path", std::string());
      toy.rationale_template_id = t.value("rationale_template_id", toy.rationale_template_id);
    }
    c.settings = toy;
  } else {
    throw ValidationError("backend config: unknown kind '" + kind + "'");
  }
  return c;
}

MockBackend::MockBackend(const std::filesystem::path& script_path) {
  for (const auto& row : read_jsonl_rows(script_path)) {
    const Json& j = row.value;
    if (!j.is_object() || !j.contains("match")) {
      throw ValidationError(script_path.string() + ":" + std::to_string(row.line) + ": mock entry needs \"match\"");
    }
    Entry e;
    if (j.contains("error")) e.error = j.at("error").get<std::string>();
    if (j.contains("texts")) e.texts = j.at("texts").get<std::vector<std::string>>();
    if (!e.error && !j.contains("texts")) {
      throw ValidationError(script_path.string() + ":" + std::to_string(row.line) +
                            ": mock entry needs \"texts\" or \"error\"");
    }
    by_item_[j.at("match").get<std::string>()].push_back(std::move(e));
  }
}

MockBackend::MockBackend(std::vector<std::pair<std::string, Entry>> script) {
  for (auto& [match, entry] : script) by_item_[match].push_back(std::move(entry));
}

std::vector<std::string> MockBackend::generate(const GenerationRequest& request) {
  request.validate();
  Entry entry;
  {
    std::lock_guard lock(mutex_);
    auto take = [&](const std::string& key) -> bool {
      auto it = by_item_.find(key);
      if (it == by_item_.end()) return false;
      std::size_t& next = next_[key];
      if (next >= it->second.size()) return false;
      entry = it->second[next++];
      return true;
    };
    if (!take(request.item_id) && !take("*")) {
      throw BackendError("mock script exhausted for item '" + request.item_id + "'");
    }
  }
  if (entry.error) throw BackendError("mock scripted failure: " + *entry.error);
  if (static_cast<int>(entry.texts.size()) < request.n) {
    throw BackendError("mock entry for '" + request.item_id + "' has " + std::to_string(entry.texts.size()) +
                       " texts, request wants " + std::to_string(request.n));
  }
  entry.texts.resize(static_cast<std::size_t>(request.n));
  return entry.texts;
}

std::string toy_rationale(std::string_view template_id, std::string_view item_id, TaskType task, int score) {
  const std::string id(item_id);
  const std::string s = std::to_string(score);
  if (template_id == "terse") {
    return task == TaskType::pointwise ? "Item " + id + ": criteria level " + s + "."
                                       : "Item " + id + ": response " + s + " preferred.";
  }
  if (template_id != "default") throw ValidationError("unknown toy rationale template '" + std::string(template_id) + "'");
  if (task == TaskType::pointwise) {
    return "For item " + id + ", the response best matches the description given for score " + s +
           " in the scoring criteria.";
  }
  return "For item " + id + ", RESPONSE " + s + " satisfies the scoring criteria better than the other response.";
}

std::string toy_judgment_text(std::string_view template_id, std::string_view item_id, TaskType task, int score) {
  return toy_rationale(template_id, item_id, task, score) + " [RESULT] " + std::to_string(score);
}

ToyBackend::ToyBackend(ToyPolicy policy, std::string rationale_template_id)
    : policy_(std::move(policy)), template_id_(std::move(rationale_template_id)) {
  policy_.validate();
  toy_rationale(template_id_, "", policy_.task_type, 1);  // rejects unknown template ids up front
}

std::vector<std::string> ToyBackend::generate(const GenerationRequest& request) {
  request.validate();
  if (!request.item) throw BackendError("toy backend needs the evaluation item on the request");
  const EvaluationItem& item = *request.item;
  if (item.task_type != policy_.task_type) {
    throw BackendError("toy backend: policy task type does not match item '" + item.id + "'");
  }
  const auto features = featurize(policy_, item);
  std::vector<std::string> texts;
  texts.reserve(static_cast<std::size_t>(request.n));

  if (request.bundle.expected_format == OutputFormat::meta_rating_1_5) {
    if (!request.judged_score) throw BackendError("toy backend: meta-judge request without judged_score");
    const int preferred = sample_score(policy_, features, 0.0, 0);
    const int rating = std::clamp(5 - std::abs(*request.judged_score - preferred), 1, 5);
    const std::string text = "The judgment's score of " + std::to_string(*request.judged_score) + " is " +
                             std::to_string(std::abs(*request.judged_score - preferred)) +
                             " away from the score this judge prefers for item " + item.id +
                             ". Judgment rating: " + std::to_string(rating);
    texts.assign(static_cast<std::size_t>(request.n), text);
    return texts;
  }

  const std::uint64_t base = request.seed.value_or(0);
  for (int i = 0; i < request.n; ++i) {
    const int score = sample_score(policy_, features, request.temperature,
                                   derive_seed(base, item.id, static_cast<std::uint64_t>(i)));
    texts.push_back(toy_judgment_text(template_id_, item.id, item.task_type, score));
  }
  return texts;
}

std::unique_ptr<JudgeBackend> make_backend(const BackendConfig& config) {
  if (auto http = std::get_if<HttpBackendConfig>(&config.settings)) return std::make_unique<HttpBackend>(*http);
  if (auto mock = std::get_if<MockBackendConfig>(&config.settings)) {
    return std::make_unique<MockBackend>(mock->script_path);
  }
  const auto& toy = std::get<ToyBackendConfig>(config.settings);
  if (toy.policy_path.empty() || !std::filesystem::exists(toy.policy_path)) {
    throw BackendError("toy policy file missing: '" + toy.policy_path.string() + "'");
  }
  return std::make_unique<ToyBackend>(load_policy(toy.policy_path), toy.rationale_template_id);
}

std::vector<std::string> generate(const BackendConfig& backend, const GenerationRequest& request) {
  return make_backend(backend)->generate(request);
}

std::vector<BatchSlot> generate_batch(JudgeBackend& backend, const std::vector<GenerationRequest>& requests,
                                      int max_concurrent) {
  if (max_concurrent < 1) throw ValidationError("generate_batch: max_concurrent must be >= 1");
  std::vector<BatchSlot> slots(requests.size());
  auto run_one = [&](std::size_t i) {
    try {
      slots[i].texts = backend.generate(requests[i]);
      if (static_cast<int>(slots[i].texts.size()) != requests[i].n) {
        throw BackendError("backend returned " + std::to_string(slots[i].texts.size()) + " texts, expected " +
                           std::to_string(requests[i].n));
      }
    } catch (const std::exception& e) {
      slots[i].texts.clear();
      slots[i].error = e.what();
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(max_concurrent), requests.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < requests.size(); ++i) run_one(i);
    return slots;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1)) run_one(i);
    });
  }
  pool.clear();  // joins
  return slots;
}

}  // namespace sre
