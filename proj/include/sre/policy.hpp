#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sre/dataset.hpp"

namespace sre {

/// Tabular linear-softmax judge over score classes: logits = W * phi(x) + b.
/// W is K x d, row-major. Scores are 1-based labels (class index = score - 1).
struct ToyPolicy {
  TaskType task_type = TaskType::pointwise;
  int feature_dim = 0;
  std::uint64_t feature_seed = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  static ToyPolicy zeros(TaskType task, int feature_dim, std::uint64_t feature_seed);

  int num_classes() const { return score_count(task_type); }
  std::size_t parameter_count() const { return weights.size() + bias.size(); }
  double& weight(int cls, int feature) { return weights[static_cast<std::size_t>(cls) * feature_dim + feature]; }
  double weight(int cls, int feature) const { return weights[static_cast<std::size_t>(cls) * feature_dim + feature]; }

  void validate() const;
  /// FNV-1a over the parameter bytes, hex encoded.
  std::string checksum() const;
  bool operator==(const ToyPolicy&) const = default;
};

/// Lowercased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Hashed bag-of-token counts (before normalization). Pointwise items hash conversation and
/// response tokens together; for pairwise items each response's tokens are tagged with
/// its slot so the linear model can compare them.
std::vector<double> feature_counts(const EvaluationItem& item, int feature_dim, std::uint64_t feature_seed);

/// L2-normalized feature_counts; an item without tokens maps to the zero vector.
std::vector<double> featurize(const EvaluationItem& item, int feature_dim, std::uint64_t feature_seed);
std::vector<double> featurize(const ToyPolicy& policy, const EvaluationItem& item);

std::vector<double> class_logits(const ToyPolicy& policy, std::span<const double> features);
std::vector<double> log_softmax(std::span<const double> logits);
std::vector<double> class_log_probs(const ToyPolicy& policy, std::span<const double> features);

/// log pi(score | item).
double policy_logprob(const ToyPolicy& policy, const EvaluationItem& item, int score);

/// Greedy (argmax, ties to the lowest score) at temperature 0, otherwise a categorical draw from
/// softmax(logits / temperature) seeded by `seed`.
int sample_score(const ToyPolicy& policy, std::span<const double> features, double temperature, std::uint64_t seed);
int sample_score(const ToyPolicy& policy, const EvaluationItem& item, double temperature, std::uint64_t seed);

enum class OptimizerKind { sgd, adam };

struct DpoConfig {
  double beta = 0.1;
  double learning_rate = 0.05;
  int epochs = 1;
  int batch_size = 16;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

/// SFT reuses the optimizer settings; beta is ignored.
using SftConfig = DpoConfig;

Json to_json(const DpoConfig& c);
DpoConfig dpo_config_from_json(const Json& j, const DpoConfig& defaults = {});

struct TrainStats {
  std::vector<double> epoch_mean_loss;
  std::size_t pair_count = 0;
  double gradient_norm = 0.0;  // full-batch gradient norm of the returned parameters
  std::string checksum;
};

Json to_json(const TrainStats& s);

struct SftExample {
  std::vector<double> features;
  int score = 1;
};

struct DpoExample {
  std::vector<double> features;
  int chosen = 1;
  int rejected = 2;
};

/// Loss and gradient over the flattened parameters (weights row-major, then bias).
struct ObjectiveValue {
  double loss = 0.0;
  std::vector<double> gradient;
};

std::vector<double> flatten(const ToyPolicy& policy);
void unflatten(ToyPolicy& policy, std::span<const double> params);

/// Mean negative log-likelihood of the target scores.
ObjectiveValue sft_objective(const ToyPolicy& policy, std::span<const SftExample> examples);

/// Mean DPO loss: -log sigmoid(beta * [(log pi(c) - log ref(c)) - (log pi(r) - log ref(r))]).
ObjectiveValue dpo_objective(const ToyPolicy& policy, const ToyPolicy& reference, std::span<const DpoExample> examples,
                             double beta);

double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference, const DpoExample& example, double beta);
double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference, const EvaluationItem& item,
                const PreferencePairRecord& pair, double beta);

std::vector<SftExample> make_sft_examples(const ToyPolicy& policy, const std::vector<EvaluationItem>& items,
                                          const std::vector<int>& scores);
/// Looks each pair's item up by id; throws if an item is missing.
std::vector<DpoExample> make_dpo_examples(const ToyPolicy& policy, const std::vector<EvaluationItem>& items,
                                          const std::vector<PreferencePairRecord>& pairs);

ToyPolicy sft_train(const ToyPolicy& policy, std::span<const SftExample> examples, const SftConfig& config,
                    TrainStats* stats = nullptr);

/// `reference` is the frozen iteration-start policy and is never modified.
ToyPolicy dpo_train(const ToyPolicy& policy, const ToyPolicy& reference, std::span<const DpoExample> examples,
                    const DpoConfig& config, TrainStats* stats = nullptr);

/// alpha * a + (1 - alpha) * b, elementwise.
ToyPolicy merge_policies(const ToyPolicy& a, const ToyPolicy& b, double alpha);

/// Versioned JSON: shape header plus row-major values at 17 significant digits.
std::string serialize_policy(const ToyPolicy& policy);
ToyPolicy deserialize_policy(std::string_view text);
void save_policy(const std::filesystem::path& path, const ToyPolicy& policy);
ToyPolicy load_policy(const std::filesystem::path& path);

}  // namespace sre
