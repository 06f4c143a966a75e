#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sre/curation.hpp"
#include "sre/dataset.hpp"
#include "sre/inference.hpp"
#include "sre/metrics.hpp"
#include "sre/policy.hpp"
#include "sre/synthetic.hpp"

namespace sre {

struct IterationSpec {
  std::size_t sample_count = 0;
  std::optional<double> sample_fraction;  // floor(fraction * |seed data|) overrides sample_count
  int n_samples = 10;
  double temperature = 1.0;
  int max_tokens = 1024;
  double meta_temperature = 0.0;  // meta_judge ratings only
  CurationConfig curation;
  DpoConfig dpo;
};

struct BaseSpec {
  std::optional<std::filesystem::path> policy_path;  // skip SFT and start from this policy
  std::size_t sft_sample_count = 0;
  SftConfig sft;
  TaskType task_type = TaskType::pointwise;
  int feature_dim = 256;
  std::uint64_t feature_seed = 7;
};

struct LoopConfig {
  std::optional<std::filesystem::path> seed_dataset_path;
  std::optional<std::filesystem::path> heldout_path;
  std::optional<ReferenceTaskConfig> synthetic;
  BackendConfig backend{ToyBackendConfig{}};
  BaseSpec base;
  std::vector<IterationSpec> iterations;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
  bool disjoint_iterations = false;
  std::optional<std::string> created_at;
  std::optional<std::filesystem::path> templates_dir;
  int max_concurrent = 1;
  Json raw = Json::object();  // the config as given, copied into the manifest

  void validate() const;
};

/// Relative paths inside the config resolve against `base_dir`.
LoopConfig loop_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
LoopConfig load_loop_config(const std::filesystem::path& path);

struct RunManifest {
  std::string run_id;
  std::string created_at;
  Json loop_config;
  Json seeds;
  std::vector<Json> stages;  // base stage first, then one entry per completed iteration
  std::string status = "running";
  std::optional<std::string> failed_stage;
  std::optional<std::string> error;

  Json to_json() const;
  static RunManifest from_json(const Json& j);
  /// Iteration entries only (stage == "iteration").
  std::vector<Json> iterations() const;
};

struct GenerateOptions {
  int n = 10;
  double temperature = 1.0;
  int max_tokens = 1024;
  std::uint64_t seed = 0;
  int max_concurrent = 1;
  const PromptTemplates* templates = nullptr;
};

struct GenerationOutcome {
  std::vector<JudgmentRecord> judgments;
  std::vector<RejectedGeneration> rejects;
  std::size_t failed_requests = 0;
};

/// Renders each item's judge prompt, samples n completions, and parses them. Unparseable texts and
/// failed requests become RejectedGeneration rows.
GenerationOutcome generate_judgments(JudgeBackend& backend, const std::vector<EvaluationItem>& items,
                                     const GenerateOptions& options);

/// Meta-judge ratings for every judgment in the pools. Judgments whose rating cannot be obtained are
/// reported in `unrated` and left out of the returned map.
std::map<std::string, MetaRatings> meta_rate(JudgeBackend& backend, const std::vector<JudgmentPool>& pools,
                                             const GenerateOptions& options,
                                             std::vector<RejectedGeneration>* unrated = nullptr);

/// Greedy predictions of the toy policy.
std::vector<int> predict_greedy(const ToyPolicy& policy, const std::vector<EvaluationItem>& items);

/// Pointwise or pairwise report (by task type) of the policy's greedy predictions.
Json evaluate_policy(const ToyPolicy& policy, const std::vector<EvaluationItem>& items);

struct IterationContext {
  int iteration = 1;
  std::uint64_t run_seed = 0;
  std::filesystem::path output_dir;  // iteration artifacts are written here
  JudgeBackend* backend = nullptr;   // null: a toy backend over the incoming policy
  std::string rationale_template_id = "default";
  const PromptTemplates* templates = nullptr;
  int max_concurrent = 1;
  std::vector<std::string> exclude_ids;  // disjoint sampling
};

struct IterationResult {
  ToyPolicy policy;
  std::vector<EvaluationItem> sample;
  std::vector<JudgmentRecord> judgments;
  std::vector<RejectedGeneration> rejects;
  std::vector<PreferencePairRecord> pairs;
  CurationSummary curation;
  std::optional<TrainStats> train_stats;
  std::string reference_checksum;
  Json entry;  // manifest entry (paths relative to the run directory)
};

/// One self-rationalization round: sample, render, generate, parse, curate, DPO against the frozen
/// incoming policy, and persist judgments, pairs, policy and stats.
IterationResult run_iteration(const ToyPolicy& policy_in, const IterationSpec& spec,
                              const std::vector<EvaluationItem>& seed_data, const IterationContext& ctx);

struct LoopOptions {
  bool resume = false;
};

/// Base policy (SFT or loaded) followed by each iteration, chaining J_SFT -> J_1 -> J_2 ...
/// Writes <output_dir>/manifest.json after every stage, including on failure (then rethrows).
RunManifest run_loop(const LoopConfig& config, const LoopOptions& options = {});

/// Per-stage seed derived from the run seed; these are the seeds recorded in the manifest.
std::uint64_t stage_seed(std::uint64_t run_seed, std::string_view stage, int iteration);

}  // namespace sre
