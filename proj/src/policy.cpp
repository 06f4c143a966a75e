#include "sre/policy.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "sre/error.hpp"
#include "sre/hashing.hpp"

namespace sre {

namespace {

constexpr const char* kPolicyFormat = "sre-toy-policy";
constexpr int kPolicyVersion = 1;

double softplus(double x) {
  // log(1 + e^x) without overflow.
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_score(const ToyPolicy& policy, int score) {
  if (score < 1 || score > policy.num_classes()) {
    throw ValidationError("score " + std::to_string(score) + " out of range for " +
                          std::to_string(policy.num_classes()) + "-class policy");
  }
}

void check_features(const ToyPolicy& policy, std::span<const double> features) {
  if (static_cast<int>(features.size()) != policy.feature_dim) {
    throw ValidationError("feature vector has dimension " + std::to_string(features.size()) + ", policy expects " +
                          std::to_string(policy.feature_dim));
  }
}

void check_same_shape(const ToyPolicy& a, const ToyPolicy& b, const char* what) {
  if (a.task_type != b.task_type || a.feature_dim != b.feature_dim || a.feature_seed != b.feature_seed ||
      a.weights.size() != b.weights.size() || a.bias.size() != b.bias.size()) {
    throw ValidationError(std::string(what) + ": policies differ in shape or feature_seed");
  }
}

void add_hashed_tokens(std::vector<double>& counts, std::string_view text, std::string_view slot,
                       std::uint64_t seed_mix) {
  const auto dim = static_cast<std::uint64_t>(counts.size());
  for (const auto& token : tokenize(text)) {
    const std::uint64_t h = mix64(fnv1a64(token, fnv1a64(slot)) ^ seed_mix);
    counts[h % dim] += 1.0;
  }
}

// Adds dLoss/dlogits (for one example) into the flattened gradient, scaled by `scale`.
void accumulate_gradient(std::vector<double>& grad, const ToyPolicy& policy, std::span<const double> features,
                         std::span<const double> dlogits, double scale) {
  const int k_count = policy.num_classes();
  const int dim = policy.feature_dim;
  const std::size_t bias_offset = policy.weights.size();
  for (int k = 0; k < k_count; ++k) {
    const double g = dlogits[k] * scale;
    if (g == 0.0) continue;
    double* row = grad.data() + static_cast<std::size_t>(k) * dim;
    for (int f = 0; f < dim; ++f) row[f] += g * features[f];
    grad[bias_offset + k] += g;
  }
}

double sft_example_loss(const ToyPolicy& policy, const SftExample& ex, std::vector<double>* dlogits) {
  const auto logp = class_log_probs(policy, ex.features);
  if (dlogits) {
    dlogits->resize(logp.size());
    for (std::size_t k = 0; k < logp.size(); ++k) (*dlogits)[k] = std::exp(logp[k]);
    (*dlogits)[ex.score - 1] -= 1.0;
  }
  return -logp[ex.score - 1];
}

double dpo_example_loss(const ToyPolicy& policy, const ToyPolicy& reference, const DpoExample& ex, double beta,
                        std::vector<double>* dlogits) {
  const auto logp = class_log_probs(policy, ex.features);
  const auto logref = class_log_probs(reference, ex.features);
  const int c = ex.chosen - 1;
  const int r = ex.rejected - 1;
  const double z = beta * ((logp[c] - logref[c]) - (logp[r] - logref[r]));
  if (dlogits) {
    // d(log pi(c) - log pi(r)) / dlogits = e_c - e_r; the softmax normalizer cancels.
    dlogits->assign(logp.size(), 0.0);
    const double dz = -sigmoid(-z) * beta;
    (*dlogits)[c] += dz;
    (*dlogits)[r] -= dz;
  }
  return softplus(-z);
}

template <typename Example, typename LossFn>
ObjectiveValue mean_objective(const ToyPolicy& policy, std::span<const Example> examples,
                              std::span<const std::size_t> order, LossFn&& loss_fn) {
  ObjectiveValue out;
  out.gradient.assign(policy.parameter_count(), 0.0);
  if (order.empty()) return out;
  const double scale = 1.0 / static_cast<double>(order.size());
  std::vector<double> dlogits;
  for (std::size_t idx : order) {
    const Example& ex = examples[idx];
    out.loss += loss_fn(ex, &dlogits) * scale;
    accumulate_gradient(out.gradient, policy, ex.features, dlogits, scale);
  }
  return out;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

class Optimizer {
 public:
  Optimizer(const DpoConfig& config, std::size_t size) : config_(config) {
    if (config_.optimizer == OptimizerKind::adam) {
      m_.assign(size, 0.0);
      v_.assign(size, 0.0);
    }
  }

  void step(std::vector<double>& params, std::span<const double> grad) {
    if (config_.optimizer == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config_.learning_rate * grad[i];
      return;
    }
    ++t_;
    const double b1 = config_.adam_beta1;
    const double b2 = config_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, t_);
    const double c2 = 1.0 - std::pow(b2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
      const double m_hat = m_[i] / c1;
      const double v_hat = v_[i] / c2;
      params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.adam_epsilon);
    }
  }

 private:
  DpoConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  int t_ = 0;
};

template <typename Example, typename LossFn>
ToyPolicy run_training(const ToyPolicy& start, std::span<const Example> examples, const DpoConfig& config,
                       const char* what, TrainStats* stats, LossFn&& make_loss) {
  config.validate();
  start.validate();
  if (examples.empty()) throw ValidationError(std::string(what) + ": no training examples");

  ToyPolicy policy = start;
  std::vector<double> params = flatten(policy);
  Optimizer optimizer(config, params.size());
  std::vector<std::size_t> order = iota_indices(examples.size());
  const auto all = iota_indices(examples.size());
  TrainStats local;
  local.pair_count = examples.size();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.shuffle_seed, "epoch", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_below(rng, i)]);
    }
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      const ObjectiveValue value = mean_objective(policy, examples, batch, make_loss(policy));
      if (!std::isfinite(value.loss)) {
        throw Error(std::string(what) + ": non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                    std::to_string(begin) + " (learning_rate=" + std::to_string(config.learning_rate) + ")");
      }
      optimizer.step(params, value.gradient);
      unflatten(policy, params);
    }
    const ObjectiveValue full = mean_objective(policy, examples, all, make_loss(policy));
    if (!std::isfinite(full.loss)) {
      throw Error(std::string(what) + ": non-finite loss after epoch " + std::to_string(epoch));
    }
    local.epoch_mean_loss.push_back(full.loss);
  }
  local.gradient_norm = l2_norm(mean_objective(policy, examples, all, make_loss(policy)).gradient);
  local.checksum = policy.checksum();
  if (stats) *stats = std::move(local);
  return policy;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void append_array(std::string& out, const std::vector<double>& values) {
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  out += ']';
}

}  // namespace

ToyPolicy ToyPolicy::zeros(TaskType task, int feature_dim, std::uint64_t feature_seed) {
  if (feature_dim < 1) throw ValidationError("feature_dim must be >= 1");
  ToyPolicy p;
  p.task_type = task;
  p.feature_dim = feature_dim;
  p.feature_seed = feature_seed;
  p.weights.assign(static_cast<std::size_t>(score_count(task)) * feature_dim, 0.0);
  p.bias.assign(static_cast<std::size_t>(score_count(task)), 0.0);
  return p;
}

void ToyPolicy::validate() const {
  if (feature_dim < 1) throw ValidationError("policy: feature_dim must be >= 1");
  if (bias.size() != static_cast<std::size_t>(num_classes())) {
    throw ValidationError("policy: bias size does not match task type");
  }
  if (weights.size() != bias.size() * static_cast<std::size_t>(feature_dim)) {
    throw ValidationError("policy: weight matrix shape mismatch");
  }
  auto finite = [](double x) { return std::isfinite(x); };
  if (!std::all_of(weights.begin(), weights.end(), finite) || !std::all_of(bias.begin(), bias.end(), finite)) {
    throw ValidationError("policy: non-finite parameter");
  }
}

std::string ToyPolicy::checksum() const {
  std::uint64_t h = fnv1a64(to_string(task_type));
  auto feed = [&](std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  feed(static_cast<std::uint64_t>(feature_dim));
  feed(feature_seed);
  for (double w : weights) feed(std::bit_cast<std::uint64_t>(w));
  for (double b : bias) feed(std::bit_cast<std::uint64_t>(b));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<double> feature_counts(const EvaluationItem& item, int feature_dim, std::uint64_t feature_seed) {
  if (feature_dim < 1) throw ValidationError("feature_dim must be >= 1");
  std::vector<double> counts(static_cast<std::size_t>(feature_dim), 0.0);
  const std::uint64_t seed_mix = mix64(feature_seed);
  for (const auto& m : item.conversation) add_hashed_tokens(counts, m.content, "", seed_mix);
  if (item.response) add_hashed_tokens(counts, item.response->content, "", seed_mix);
  if (item.response_1) add_hashed_tokens(counts, item.response_1->content, "response_1", seed_mix);
  if (item.response_2) add_hashed_tokens(counts, item.response_2->content, "response_2", seed_mix);
  return counts;
}

std::vector<double> featurize(const EvaluationItem& item, int feature_dim, std::uint64_t feature_seed) {
  auto v = feature_counts(item, feature_dim, feature_seed);
  const double norm = l2_norm(v);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

std::vector<double> featurize(const ToyPolicy& policy, const EvaluationItem& item) {
  return featurize(item, policy.feature_dim, policy.feature_seed);
}

std::vector<double> class_logits(const ToyPolicy& policy, std::span<const double> features) {
  check_features(policy, features);
  const int k_count = policy.num_classes();
  std::vector<double> logits(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    double s = policy.bias[k];
    const double* row = policy.weights.data() + static_cast<std::size_t>(k) * policy.feature_dim;
    for (int f = 0; f < policy.feature_dim; ++f) s += row[f] * features[f];
    logits[k] = s;
  }
  return logits;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - max);
  const double log_z = max + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] = logits[k] - log_z;
  return out;
}

std::vector<double> class_log_probs(const ToyPolicy& policy, std::span<const double> features) {
  return log_softmax(class_logits(policy, features));
}

double policy_logprob(const ToyPolicy& policy, const EvaluationItem& item, int score) {
  check_score(policy, score);
  return class_log_probs(policy, featurize(policy, item))[score - 1];
}

int sample_score(const ToyPolicy& policy, std::span<const double> features, double temperature, std::uint64_t seed) {
  if (!(temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
  const auto logits = class_logits(policy, features);
  if (temperature == 0.0) {
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin()) + 1;
  }
  std::vector<double> scaled(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) scaled[k] = logits[k] / temperature;
  const auto logp = log_softmax(scaled);
  Rng rng(mix64(seed));
  const double u = unit_uniform(rng);
  double cumulative = 0.0;
  for (std::size_t k = 0; k < logp.size(); ++k) {
    cumulative += std::exp(logp[k]);
    if (u < cumulative) return static_cast<int>(k) + 1;
  }
  // Rounding left cumulative just below 1: fall back to the last class with mass.
  for (std::size_t k = logp.size(); k-- > 0;) {
    if (std::exp(logp[k]) > 0.0) return static_cast<int>(k) + 1;
  }
  return static_cast<int>(logp.size());
}

int sample_score(const ToyPolicy& policy, const EvaluationItem& item, double temperature, std::uint64_t seed) {
  return sample_score(policy, featurize(policy, item), temperature, seed);
}

void DpoConfig::validate() const {
  if (!(beta >= 0.0)) throw ValidationError("beta must be >= 0");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (optimizer == OptimizerKind::adam &&
      !(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_epsilon > 0)) {
    throw ValidationError("invalid adam parameters");
  }
}

Json to_json(const DpoConfig& c) {
  Json j{{"beta", c.beta},
         {"learning_rate", c.learning_rate},
         {"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"optimizer", c.optimizer == OptimizerKind::sgd ? "sgd" : "adam"},
         {"shuffle_seed", c.shuffle_seed}};
  if (c.optimizer == OptimizerKind::adam) {
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_epsilon"] = c.adam_epsilon;
  }
  return j;
}

DpoConfig dpo_config_from_json(const Json& j, const DpoConfig& defaults) {
  DpoConfig c = defaults;
  c.beta = j.value("beta", c.beta);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("optimizer")) {
    const auto name = j.at("optimizer").get<std::string>();
    if (name == "sgd") {
      c.optimizer = OptimizerKind::sgd;
    } else if (name == "adam") {
      c.optimizer = OptimizerKind::adam;
    } else {
      throw ValidationError("unknown optimizer '" + name + "'");
    }
  }
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.shuffle_seed = j.value("shuffle_seed", c.shuffle_seed);
  c.validate();
  return c;
}

Json to_json(const TrainStats& s) {
  return Json{{"epoch_mean_loss", s.epoch_mean_loss},
              {"pair_count", s.pair_count},
              {"gradient_norm", s.gradient_norm},
              {"checksum", s.checksum}};
}

std::vector<double> flatten(const ToyPolicy& policy) {
  std::vector<double> params(policy.weights);
  params.insert(params.end(), policy.bias.begin(), policy.bias.end());
  return params;
}

void unflatten(ToyPolicy& policy, std::span<const double> params) {
  if (params.size() != policy.parameter_count()) throw ValidationError("parameter vector size mismatch");
  std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(policy.weights.size()),
            policy.weights.begin());
  std::copy(params.begin() + static_cast<std::ptrdiff_t>(policy.weights.size()), params.end(), policy.bias.begin());
}

ObjectiveValue sft_objective(const ToyPolicy& policy, std::span<const SftExample> examples) {
  for (const auto& ex : examples) check_score(policy, ex.score);
  const auto all = iota_indices(examples.size());
  return mean_objective(policy, examples, all, [&](const SftExample& ex, std::vector<double>* d) {
    return sft_example_loss(policy, ex, d);
  });
}

ObjectiveValue dpo_objective(const ToyPolicy& policy, const ToyPolicy& reference, std::span<const DpoExample> examples,
                             double beta) {
  check_same_shape(policy, reference, "dpo_objective");
  for (const auto& ex : examples) {
    check_score(policy, ex.chosen);
    check_score(policy, ex.rejected);
  }
  const auto all = iota_indices(examples.size());
  return mean_objective(policy, examples, all, [&](const DpoExample& ex, std::vector<double>* d) {
    return dpo_example_loss(policy, reference, ex, beta, d);
  });
}

double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference, const DpoExample& example, double beta) {
  check_same_shape(policy, reference, "dpo_loss");
  check_score(policy, example.chosen);
  check_score(policy, example.rejected);
  return dpo_example_loss(policy, reference, example, beta, nullptr);
}

double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference, const EvaluationItem& item,
                const PreferencePairRecord& pair, double beta) {
  if (pair.item_id != item.id) throw ValidationError("dpo_loss: pair does not belong to item '" + item.id + "'");
  return dpo_loss(policy, reference, DpoExample{featurize(policy, item), pair.chosen.score, pair.rejected.score},
                  beta);
}

std::vector<SftExample> make_sft_examples(const ToyPolicy& policy, const std::vector<EvaluationItem>& items,
                                          const std::vector<int>& scores) {
  if (items.size() != scores.size()) throw ValidationError("make_sft_examples: items/scores length mismatch");
  std::vector<SftExample> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    check_score(policy, scores[i]);
    out.push_back({featurize(policy, items[i]), scores[i]});
  }
  return out;
}

std::vector<DpoExample> make_dpo_examples(const ToyPolicy& policy, const std::vector<EvaluationItem>& items,
                                          const std::vector<PreferencePairRecord>& pairs) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < items.size(); ++i) index.emplace(items[i].id, i);
  std::unordered_map<std::string, std::vector<double>> cache;
  std::vector<DpoExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto it = index.find(p.item_id);
    if (it == index.end()) throw ValidationError("pair references unknown item '" + p.item_id + "'");
    auto [cached, inserted] = cache.try_emplace(p.item_id);
    if (inserted) cached->second = featurize(policy, items[it->second]);
    check_score(policy, p.chosen.score);
    check_score(policy, p.rejected.score);
    out.push_back({cached->second, p.chosen.score, p.rejected.score});
  }
  return out;
}

ToyPolicy sft_train(const ToyPolicy& policy, std::span<const SftExample> examples, const SftConfig& config,
                    TrainStats* stats) {
  for (const auto& ex : examples) check_score(policy, ex.score);
  return run_training(policy, examples, config, "sft_train", stats, [](const ToyPolicy& current) {
    return [&current](const SftExample& ex, std::vector<double>* d) { return sft_example_loss(current, ex, d); };
  });
}

ToyPolicy dpo_train(const ToyPolicy& policy, const ToyPolicy& reference, std::span<const DpoExample> examples,
                    const DpoConfig& config, TrainStats* stats) {
  check_same_shape(policy, reference, "dpo_train");
  reference.validate();
  for (const auto& ex : examples) {
    check_score(policy, ex.chosen);
    check_score(policy, ex.rejected);
  }
  const double beta = config.beta;
  return run_training(policy, examples, config, "dpo_train", stats, [&reference, beta](const ToyPolicy& current) {
    return [&current, &reference, beta](const DpoExample& ex, std::vector<double>* d) {
      return dpo_example_loss(current, reference, ex, beta, d);
    };
  });
}

ToyPolicy merge_policies(const ToyPolicy& a, const ToyPolicy& b, double alpha) {
  check_same_shape(a, b, "merge_policies");
  if (!std::isfinite(alpha)) throw ValidationError("merge_policies: alpha must be finite");
  ToyPolicy out = a;
  const double beta = 1.0 - alpha;
  // Equal entries are copied so merging a policy with itself is exact for any alpha.
  auto mix = [&](double x, double y) { return x == y ? x : alpha * x + beta * y; };
  for (std::size_t i = 0; i < out.weights.size(); ++i) out.weights[i] = mix(a.weights[i], b.weights[i]);
  for (std::size_t i = 0; i < out.bias.size(); ++i) out.bias[i] = mix(a.bias[i], b.bias[i]);
  return out;
}

std::string serialize_policy(const ToyPolicy& policy) {
  policy.validate();
  std::string out = "{\n";
  out += "  \"format\": \"" + std::string(kPolicyFormat) + "\",\n";
  out += "  \"version\": " + std::to_string(kPolicyVersion) + ",\n";
  out += "  \"task_type\": \"" + std::string(to_string(policy.task_type)) + "\",\n";
  out += "  \"num_classes\": " + std::to_string(policy.num_classes()) + ",\n";
  out += "  \"feature_dim\": " + std::to_string(policy.feature_dim) + ",\n";
  out += "  \"feature_seed\": " + std::to_string(policy.feature_seed) + ",\n";
  out += "  \"weights\": ";
  append_array(out, policy.weights);
  out += ",\n  \"bias\": ";
  append_array(out, policy.bias);
  out += "\n}\n";
  return out;
}

ToyPolicy deserialize_policy(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("policy file: malformed JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kPolicyFormat) throw ValidationError("policy file: unknown format");
    if (j.at("version").get<int>() != kPolicyVersion) throw ValidationError("policy file: unsupported version");
    ToyPolicy p;
    p.task_type = parse_task_type(j.at("task_type").get<std::string>());
    p.feature_dim = j.at("feature_dim").get<int>();
    p.feature_seed = j.at("feature_seed").get<std::uint64_t>();
    p.weights = j.at("weights").get<std::vector<double>>();
    p.bias = j.at("bias").get<std::vector<double>>();
    if (j.at("num_classes").get<int>() != p.num_classes()) {
      throw ValidationError("policy file: num_classes does not match task_type");
    }
    p.validate();
    return p;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("policy file: ") + e.what());
  }
}

void save_policy(const std::filesystem::path& path, const ToyPolicy& policy) {
  write_text_file(path, serialize_policy(policy));
}

ToyPolicy load_policy(const std::filesystem::path& path) { return deserialize_policy(read_text_file(path)); }

}  // namespace sre
