#include "sre/loop.hpp"

#include <chrono>
#include <ctime>
#include <set>
#include <unordered_set>

#include "sre/error.hpp"
#include "sre/hashing.hpp"
#include "sre/parser.hpp"

namespace sre {

namespace fs = std::filesystem;

namespace {

/// Carries the name of the pipeline stage that failed.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_json_file(const fs::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

std::vector<EvaluationItem> with_categories(std::vector<EvaluationItem> items) {
  for (auto& item : items) {
    if (!item.category) item.category = "uncategorized";
  }
  return items;
}

std::vector<EvaluationItem> exclude(const std::vector<EvaluationItem>& items, const std::vector<std::string>& ids) {
  if (ids.empty()) return items;
  const std::unordered_set<std::string> drop(ids.begin(), ids.end());
  std::vector<EvaluationItem> out;
  for (const auto& item : items) {
    if (!drop.count(item.id)) out.push_back(item);
  }
  return out;
}

std::size_t resolve_sample_count(const IterationSpec& spec, std::size_t available) {
  if (spec.sample_fraction) return count_from_fraction(*spec.sample_fraction, available);
  return spec.sample_count;
}

struct LoadedData {
  std::vector<EvaluationItem> seed;
  std::vector<EvaluationItem> heldout;
};

LoadedData load_data(const LoopConfig& config) {
  LoadedData data;
  if (config.synthetic) {
    auto task = make_reference_task(*config.synthetic);
    data.seed = std::move(task.train);
    data.heldout = std::move(task.heldout);
  } else {
    data.seed = load_items(*config.seed_dataset_path);
    if (config.heldout_path) data.heldout = load_items(*config.heldout_path);
  }
  return data;
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t run_seed, std::string_view stage, int iteration) {
  return derive_seed(run_seed, stage, static_cast<std::uint64_t>(iteration));
}

void LoopConfig::validate() const {
  if (!synthetic && !seed_dataset_path) throw ValidationError("loop config: need seed_dataset_path or synthetic");
  if (synthetic && seed_dataset_path) throw ValidationError("loop config: seed_dataset_path and synthetic are exclusive");
  if (base.feature_dim < 1) throw ValidationError("loop config: base.feature_dim must be >= 1");
  if (max_concurrent < 1) throw ValidationError("loop config: max_concurrent must be >= 1");
  for (const auto& it : iterations) {
    if (it.n_samples < 1) throw ValidationError("loop config: n_samples must be >= 1");
    if (!(it.temperature >= 0.0)) throw ValidationError("loop config: temperature must be >= 0");
    it.curation.validate();
    it.dpo.validate();
  }
}

LoopConfig loop_config_from_json(const Json& j, const fs::path& base_dir) {
  try {
    LoopConfig c;
    c.raw = j;
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("seed_dataset_path")) c.seed_dataset_path = resolve(base_dir, j.at("seed_dataset_path").get<std::string>());
    if (j.contains("heldout_path")) c.heldout_path = resolve(base_dir, j.at("heldout_path").get<std::string>());
    if (j.contains("synthetic")) c.synthetic = reference_task_config_from_json(j.at("synthetic"));
    if (j.contains("backend")) {
      c.backend = backend_config_from_json(j.at("backend"));
      if (auto mock = std::get_if<MockBackendConfig>(&c.backend.settings)) {
        mock->script_path = resolve(base_dir, mock->script_path);
      } else if (auto toy = std::get_if<ToyBackendConfig>(&c.backend.settings)) {
        toy->policy_path = resolve(base_dir, toy->policy_path);
      }
    }
    if (j.contains("base")) {
      const Json& b = j.at("base");
      if (b.contains("policy_path")) c.base.policy_path = resolve(base_dir, b.at("policy_path").get<std::string>());
      c.base.sft_sample_count = b.value("sft_sample_count", c.base.sft_sample_count);
      if (b.contains("task_type")) c.base.task_type = parse_task_type(b.at("task_type").get<std::string>());
      c.base.feature_dim = b.value("feature_dim", c.base.feature_dim);
      c.base.feature_seed = b.value("feature_seed", c.base.feature_seed);
      SftConfig sft_defaults;
      sft_defaults.shuffle_seed = stage_seed(c.seed, "base-sft-shuffle", 0);
      c.base.sft = dpo_config_from_json(b.value("sft", Json::object()), sft_defaults);
    }
    if (j.contains("iterations")) {
      int index = 0;
      for (const Json& it : j.at("iterations")) {
        ++index;
        IterationSpec spec;
        spec.sample_count = it.value("sample_count", spec.sample_count);
        if (it.contains("sample_fraction")) spec.sample_fraction = it.at("sample_fraction").get<double>();
        spec.n_samples = it.value("n_samples", spec.n_samples);
        spec.temperature = it.value("temperature", spec.temperature);
        spec.max_tokens = it.value("max_tokens", spec.max_tokens);
        spec.meta_temperature = it.value("meta_temperature", spec.meta_temperature);
        CurationConfig cur_defaults;
        cur_defaults.seed = stage_seed(c.seed, "curation", index);
        spec.curation = curation_config_from_json(it.value("curation", Json::object()), cur_defaults);
        spec.curation.iteration = index;
        DpoConfig dpo_defaults;
        dpo_defaults.shuffle_seed = stage_seed(c.seed, "dpo-shuffle", index);
        spec.dpo = dpo_config_from_json(it.value("dpo", Json::object()), dpo_defaults);
        c.iterations.push_back(spec);
      }
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    c.disjoint_iterations = j.value("disjoint_iterations", false);
    if (j.contains("created_at")) c.created_at = j.at("created_at").get<std::string>();
    if (j.contains("templates_dir")) c.templates_dir = resolve(base_dir, j.at("templates_dir").get<std::string>());
    c.max_concurrent = j.value("max_concurrent", std::max(c.max_concurrent, c.backend.max_concurrent()));
    c.validate();
    return c;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("loop config: ") + e.what());
  }
}

LoopConfig load_loop_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON: " + e.what());
  }
  return loop_config_from_json(j, path.parent_path());
}

Json RunManifest::to_json() const {
  Json j{{"run_id", run_id}, {"created_at", created_at}, {"loop_config", loop_config},
         {"seeds", seeds},   {"stages", stages},         {"status", status}};
  if (failed_stage) j["failed_stage"] = *failed_stage;
  if (error) j["error"] = *error;
  return j;
}

RunManifest RunManifest::from_json(const Json& j) {
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  m.loop_config = j.at("loop_config");
  m.seeds = j.value("seeds", Json::object());
  m.stages = j.at("stages").get<std::vector<Json>>();
  m.status = j.at("status").get<std::string>();
  if (j.contains("failed_stage")) m.failed_stage = j.at("failed_stage").get<std::string>();
  if (j.contains("error")) m.error = j.at("error").get<std::string>();
  return m;
}

std::vector<Json> RunManifest::iterations() const {
  std::vector<Json> out;
  for (const auto& s : stages) {
    if (s.value("stage", "") == "iteration") out.push_back(s);
  }
  return out;
}

GenerationOutcome generate_judgments(JudgeBackend& backend, const std::vector<EvaluationItem>& items,
                                     const GenerateOptions& options) {
  const PromptTemplates& templates = options.templates ? *options.templates : PromptTemplates::defaults();
  std::vector<GenerationRequest> requests;
  requests.reserve(items.size());
  for (const auto& item : items) {
    GenerationRequest r;
    r.bundle = render_judge_prompt(item, templates);
    r.n = options.n;
    r.temperature = options.temperature;
    r.max_tokens = options.max_tokens;
    r.seed = options.seed;
    r.item_id = item.id;
    r.item = item;
    requests.push_back(std::move(r));
  }
  const auto slots = generate_batch(backend, requests, options.max_concurrent);
  GenerationOutcome out;
  const std::string backend_name = backend.name();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (!slots[i].ok()) {
      ++out.failed_requests;
      for (int k = 0; k < options.n; ++k) {
        out.rejects.push_back({item.id, k, "", "generation failed: " + *slots[i].error});
      }
      continue;
    }
    for (int k = 0; k < options.n; ++k) {
      const std::string& text = slots[i].texts[static_cast<std::size_t>(k)];
      const ParseResult parsed =
          item.task_type == TaskType::pointwise ? parse_pointwise(text) : parse_pairwise(text);
      if (!parsed) {
        out.rejects.push_back({item.id, k, text, std::string(to_string(parsed.error()))});
        continue;
      }
      JudgmentRecord j;
      j.item_id = item.id;
      j.sample_index = k;
      j.rationale = parsed->rationale;
      j.score = parsed->value;
      j.raw_text = text;
      j.backend = backend_name;
      j.temperature = options.temperature;
      out.judgments.push_back(std::move(j));
    }
  }
  return out;
}

std::map<std::string, MetaRatings> meta_rate(JudgeBackend& backend, const std::vector<JudgmentPool>& pools,
                                             const GenerateOptions& options,
                                             std::vector<RejectedGeneration>* unrated) {
  const PromptTemplates& templates = options.templates ? *options.templates : PromptTemplates::defaults();
  std::vector<GenerationRequest> requests;
  std::vector<std::pair<std::size_t, std::size_t>> origin;  // (pool, judgment)
  for (std::size_t p = 0; p < pools.size(); ++p) {
    for (std::size_t k = 0; k < pools[p].judgments.size(); ++k) {
      const auto& item = pools[p].item;
      const auto& judgment = pools[p].judgments[k];
      GenerationRequest r;
      r.bundle = render_meta_judge(item, judgment, templates);
      r.n = 1;
      r.temperature = options.temperature;
      r.max_tokens = options.max_tokens;
      r.seed = derive_seed(options.seed, item.id, static_cast<std::uint64_t>(judgment.sample_index));
      r.item_id = item.id;
      r.item = item;
      r.judged_score = judgment.score;
      requests.push_back(std::move(r));
      origin.emplace_back(p, k);
    }
  }
  const auto slots = generate_batch(backend, requests, options.max_concurrent);
  std::map<std::string, MetaRatings> ratings;
  for (const auto& pool : pools) ratings[pool.item.id];
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& pool = pools[origin[i].first];
    const auto& judgment = pool.judgments[origin[i].second];
    if (!slots[i].ok()) {
      if (unrated) unrated->push_back({pool.item.id, judgment.sample_index, "", "meta-judge failed: " + *slots[i].error});
      continue;
    }
    const ParseResult parsed = parse_meta_rating(slots[i].texts.front());
    if (!parsed) {
      if (unrated) {
        unrated->push_back({pool.item.id, judgment.sample_index, slots[i].texts.front(),
                            "meta-judge " + std::string(to_string(parsed.error()))});
      }
      continue;
    }
    ratings[pool.item.id][judgment.sample_index] = parsed->value;
  }
  return ratings;
}

std::vector<int> predict_greedy(const ToyPolicy& policy, const std::vector<EvaluationItem>& items) {
  std::vector<int> preds;
  preds.reserve(items.size());
  for (const auto& item : items) preds.push_back(sample_score(policy, item, 0.0, 0));
  return preds;
}

Json evaluate_policy(const ToyPolicy& policy, const std::vector<EvaluationItem>& items) {
  if (items.empty()) return nullptr;
  std::vector<EvaluationItem> labeled;
  for (const auto& item : items) {
    if (item.task_type == policy.task_type && item.has_ground_truth()) labeled.push_back(item);
  }
  if (labeled.empty()) return nullptr;
  const auto preds = predict_greedy(policy, labeled);
  if (policy.task_type == TaskType::pointwise) {
    std::vector<int> truths;
    for (const auto& item : labeled) truths.push_back(*item.ground_truth_score);
    return to_json(pointwise_report(preds, truths));
  }
  return to_json(pairwise_report(with_categories(labeled), preds));
}

IterationResult run_iteration(const ToyPolicy& policy_in, const IterationSpec& spec,
                              const std::vector<EvaluationItem>& seed_data, const IterationContext& ctx) {
  const int t = ctx.iteration;
  const std::string prefix = "iteration " + std::to_string(t) + ": ";
  const PromptTemplates& templates = ctx.templates ? *ctx.templates : PromptTemplates::defaults();
  IterationResult result{policy_in, {}, {}, {}, {}, {}, std::nullopt, policy_in.checksum(), Json::object()};

  const std::uint64_t sample_seed = stage_seed(ctx.run_seed, "iteration-sample", t);
  const std::uint64_t generate_seed = stage_seed(ctx.run_seed, "iteration-generate", t);
  const std::uint64_t meta_seed = stage_seed(ctx.run_seed, "iteration-meta", t);

  result.sample = in_stage(prefix + "sample", [&] {
    const auto pool = exclude(seed_data, ctx.exclude_ids);
    return sample_subset(pool, resolve_sample_count(spec, pool.size()), sample_seed);
  });

  std::optional<ToyBackend> toy;
  JudgeBackend* backend = ctx.backend;
  if (!backend) {
    toy.emplace(policy_in, ctx.rationale_template_id);
    backend = &*toy;
  }

  GenerateOptions gen{spec.n_samples, spec.temperature, spec.max_tokens, generate_seed, ctx.max_concurrent, &templates};
  GenerationOutcome outcome = in_stage(prefix + "generate", [&] {
    auto o = generate_judgments(*backend, result.sample, gen);
    if (!result.sample.empty() && o.failed_requests == result.sample.size()) {
      throw BackendError("every generation request failed; first error: " + o.rejects.front().error);
    }
    return o;
  });
  result.judgments = std::move(outcome.judgments);
  result.rejects = std::move(outcome.rejects);

  auto pools = in_stage(prefix + "parse", [&] {
    return build_pools(result.sample, result.judgments, std::nullopt, result.rejects);
  });

  result.pairs = in_stage(prefix + "curate", [&] {
    std::map<std::string, MetaRatings> ratings;
    if (spec.curation.method == CurationMethod::meta_judge) {
      std::vector<RejectedGeneration> unrated;
      GenerateOptions meta{1, spec.meta_temperature, spec.max_tokens, meta_seed, ctx.max_concurrent, &templates};
      ratings = meta_rate(*backend, pools, meta, &unrated);
      // Unrated judgments cannot be ordered; they leave the pool and count as dropped.
      for (auto& pool : pools) {
        const auto& rated = ratings[pool.item.id];
        const auto before = pool.judgments.size();
        std::erase_if(pool.judgments, [&](const JudgmentRecord& j) { return !rated.count(j.sample_index); });
        pool.dropped_count += static_cast<int>(before - pool.judgments.size());
      }
    }
    return curate_pools(pools, spec.curation, &ratings, &result.curation);
  });

  in_stage(prefix + "train", [&] {
    if (result.pairs.empty()) return;
    const auto examples = make_dpo_examples(policy_in, result.sample, result.pairs);
    TrainStats stats;
    result.policy = dpo_train(policy_in, policy_in, examples, spec.dpo, &stats);
    result.train_stats = std::move(stats);
  });

  const fs::path rel = "iter_" + std::to_string(t);
  in_stage(prefix + "persist", [&] {
    const fs::path dir = ctx.output_dir / rel;
    fs::create_directories(dir);
    write_records(dir / "judgments.jsonl", result.judgments);
    write_records(dir / "rejects.jsonl", result.rejects);
    write_records(dir / "pairs.jsonl", result.pairs);
    save_policy(dir / "policy.json", result.policy);
    write_json_file(dir / "curation_summary.json", to_json(result.curation));
    write_json_file(dir / "train_stats.json", result.train_stats ? to_json(*result.train_stats) : Json(nullptr));
  });

  result.entry = Json{{"stage", "iteration"},
                      {"iteration", t},
                      {"sample_count", result.sample.size()},
                      {"judgments_path", (rel / "judgments.jsonl").generic_string()},
                      {"rejects_path", (rel / "rejects.jsonl").generic_string()},
                      {"pairs_path", (rel / "pairs.jsonl").generic_string()},
                      {"policy_path", (rel / "policy.json").generic_string()},
                      {"judgment_count", result.judgments.size()},
                      {"rejected_count", result.rejects.size()},
                      {"pair_count", result.pairs.size()},
                      {"curation", to_json(spec.curation)},
                      {"curation_summary", to_json(result.curation)},
                      {"dpo", to_json(spec.dpo)},
                      {"train_stats", result.train_stats ? to_json(*result.train_stats) : Json(nullptr)},
                      {"reference_checksum", result.reference_checksum},
                      {"reference_checksum_after", policy_in.checksum()},
                      {"policy_checksum", result.policy.checksum()},
                      {"seeds", Json{{"sample", sample_seed}, {"generate", generate_seed}, {"meta", meta_seed}}}};
  return result;
}

RunManifest run_loop(const LoopConfig& config, const LoopOptions& options) {
  config.validate();
  const fs::path out_dir = config.output_dir;
  fs::create_directories(out_dir);
  const fs::path manifest_path = out_dir / "manifest.json";

  RunManifest manifest;
  manifest.loop_config = config.raw;
  manifest.run_id = "run-" + hex64(fnv1a64(config.raw.dump()));
  manifest.created_at = config.created_at.value_or(utc_now());
  manifest.seeds = Json{{"global", config.seed},
                        {"base_sft_sample", stage_seed(config.seed, "base-sft-sample", 0)},
                        {"base_sft_shuffle", config.base.sft.shuffle_seed}};

  std::vector<Json> previous;
  if (options.resume && fs::exists(manifest_path)) {
    const auto old = RunManifest::from_json(Json::parse(read_text_file(manifest_path)));
    if (old.run_id != manifest.run_id) {
      throw ValidationError("resume: manifest in " + out_dir.string() + " belongs to a different config (" +
                            old.run_id + ")");
    }
    previous = old.stages;
    manifest.created_at = old.created_at;
  }
  auto reusable = [&](std::size_t index) -> std::optional<ToyPolicy> {
    if (index >= previous.size()) return std::nullopt;
    const Json& s = previous[index];
    const fs::path policy_path = out_dir / s.at("policy_path").get<std::string>();
    if (!fs::exists(policy_path)) return std::nullopt;
    for (const char* key : {"judgments_path", "rejects_path", "pairs_path"}) {
      if (s.contains(key) && !fs::exists(out_dir / s.at(key).get<std::string>())) return std::nullopt;
    }
    ToyPolicy p = load_policy(policy_path);
    if (p.checksum() != s.at("policy_checksum").get<std::string>()) return std::nullopt;
    return p;
  };

  auto write_manifest = [&] { write_json_file(manifest_path, manifest.to_json()); };
  auto fail = [&](const std::string& stage, const std::string& what) {
    manifest.status = "failed";
    manifest.failed_stage = stage;
    manifest.error = what;
    write_manifest();
  };

  try {
    const LoadedData data = in_stage("load", [&] { return load_data(config); });
    const std::optional<PromptTemplates> templates =
        config.templates_dir ? std::optional(PromptTemplates::with_overrides(*config.templates_dir)) : std::nullopt;

    // Base policy.
    ToyPolicy policy;
    bool resumed = true;
    if (auto p = reusable(0)) {
      policy = *p;
      manifest.stages.push_back(previous[0]);
    } else {
      resumed = false;
      Json entry{{"stage", "base"}};
      policy = in_stage("base", [&] {
        if (config.base.policy_path) {
          entry["source"] = "file";
          return load_policy(*config.base.policy_path);
        }
        entry["source"] = "sft";
        ToyPolicy start = ToyPolicy::zeros(config.base.task_type, config.base.feature_dim, config.base.feature_seed);
        std::vector<EvaluationItem> labeled;
        for (const auto& item : data.seed) {
          if (item.task_type == config.base.task_type && item.has_ground_truth()) labeled.push_back(item);
        }
        const auto subset = sample_subset(labeled, std::min(config.base.sft_sample_count, labeled.size()),
                                          stage_seed(config.seed, "base-sft-sample", 0));
        entry["sft_sample_count"] = subset.size();
        if (subset.empty() || config.base.sft.epochs == 0) return start;
        std::vector<int> targets;
        for (const auto& item : subset) targets.push_back(*item.ground_truth());
        TrainStats stats;
        ToyPolicy trained = sft_train(start, make_sft_examples(start, subset, targets), config.base.sft, &stats);
        entry["train_stats"] = to_json(stats);
        return trained;
      });
      in_stage("base", [&] { save_policy(out_dir / "base" / "policy.json", policy); });
      entry["policy_path"] = "base/policy.json";
      entry["policy_checksum"] = policy.checksum();
      entry["metrics"] = Json{{"heldout", evaluate_policy(policy, data.heldout)}};
      manifest.stages.push_back(entry);
    }
    write_manifest();

    std::unique_ptr<JudgeBackend> external;
    if (config.backend.kind() != "toy") external = in_stage("backend", [&] { return make_backend(config.backend); });
    const std::string template_id = config.backend.kind() == "toy"
                                        ? std::get<ToyBackendConfig>(config.backend.settings).rationale_template_id
                                        : std::string("default");

    std::vector<std::string> used_ids;
    for (std::size_t t = 1; t <= config.iterations.size(); ++t) {
      const IterationSpec& spec = config.iterations[t - 1];
      const int iteration = static_cast<int>(t);
      const std::vector<std::string> excluded = config.disjoint_iterations ? used_ids : std::vector<std::string>{};
      std::optional<ToyPolicy> reused = resumed ? reusable(t) : std::nullopt;
      if (reused) {
        // Recompute the sample so disjoint sampling sees the same history.
        const auto pool = exclude(data.seed, excluded);
        for (const auto& item : sample_subset(pool, resolve_sample_count(spec, pool.size()),
                                              stage_seed(config.seed, "iteration-sample", iteration))) {
          used_ids.push_back(item.id);
        }
        policy = *reused;
        manifest.stages.push_back(previous[t]);
        write_manifest();
        continue;
      }
      resumed = false;
      IterationContext ctx;
      ctx.iteration = iteration;
      ctx.run_seed = config.seed;
      ctx.output_dir = out_dir;
      ctx.backend = external.get();
      ctx.rationale_template_id = template_id;
      ctx.templates = templates ? &*templates : nullptr;
      ctx.max_concurrent = config.max_concurrent;
      ctx.exclude_ids = excluded;
      IterationResult result = run_iteration(policy, spec, data.seed, ctx);
      for (const auto& item : result.sample) used_ids.push_back(item.id);
      if (result.reference_checksum != policy.checksum()) {
        throw StageError("iteration " + std::to_string(t) + ": train", "reference policy was modified");
      }
      policy = std::move(result.policy);
      result.entry["metrics"] = Json{{"heldout", evaluate_policy(policy, data.heldout)}};
      manifest.stages.push_back(std::move(result.entry));
      write_manifest();
    }
    manifest.status = "complete";
    write_manifest();
  } catch (const StageError& e) {
    fail(e.stage(), e.what());
    throw;
  } catch (const std::exception& e) {
    fail("unknown", e.what());
    throw;
  }
  return manifest;
}

}  // namespace sre
