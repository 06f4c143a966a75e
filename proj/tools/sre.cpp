// Command-line front end for the self-rationalizing judge pipeline.

#include <csignal>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "sre/annotation.hpp"
#include "sre/curation.hpp"
#include "sre/dataset.hpp"
#include "sre/error.hpp"
#include "sre/inference.hpp"
#include "sre/loop.hpp"
#include "sre/metrics.hpp"
#include "sre/policy.hpp"
#include "sre/synthetic.hpp"

namespace fs = std::filesystem;
using namespace sre;

namespace {

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

Json read_json_file(const fs::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON: " + e.what());
  }
}

struct BackendArgs {
  std::string config_path;
  std::string policy_path;
  std::string rationale_template = "default";

  std::unique_ptr<JudgeBackend> make() const {
    if (!config_path.empty() && !policy_path.empty()) throw ValidationError("give --backend or --policy, not both");
    if (!config_path.empty()) {
      BackendConfig c = backend_config_from_json(read_json_file(config_path));
      const fs::path base = fs::path(config_path).parent_path();
      if (auto mock = std::get_if<MockBackendConfig>(&c.settings); mock && mock->script_path.is_relative()) {
        mock->script_path = base / mock->script_path;
      }
      if (auto toy = std::get_if<ToyBackendConfig>(&c.settings); toy && toy->policy_path.is_relative()) {
        toy->policy_path = base / toy->policy_path;
      }
      return make_backend(c);
    }
    if (!policy_path.empty()) return std::make_unique<ToyBackend>(load_policy(policy_path), rationale_template);
    throw ValidationError("a backend is required: --backend <config.json> or --policy <policy.json>");
  }
};

void add_backend_options(CLI::App* cmd, BackendArgs& args) {
  cmd->add_option("--backend", args.config_path, "Backend config JSON ({\"kind\": \"http\"|\"mock\"|\"toy\", ...})");
  cmd->add_option("--policy", args.policy_path, "Toy policy file (shorthand for a toy backend)");
  cmd->add_option("--rationale-template", args.rationale_template, "Toy rationale template id");
}

void add_dpo_options(CLI::App* cmd, DpoConfig& c) {
  cmd->add_option("--beta", c.beta, "DPO temperature");
  cmd->add_option("--lr", c.learning_rate, "Learning rate");
  cmd->add_option("--epochs", c.epochs, "Epochs");
  cmd->add_option("--batch-size", c.batch_size, "Minibatch size");
  cmd->add_option("--shuffle-seed", c.shuffle_seed, "Minibatch shuffle seed");
  cmd->add_option("--optimizer", c.optimizer, "sgd or adam")
      ->transform(CLI::CheckedTransformer(std::map<std::string, OptimizerKind>{{"sgd", OptimizerKind::sgd},
                                                                               {"adam", OptimizerKind::adam}}));
}

std::vector<JudgmentPool> pools_for(const std::string& items_path, const std::string& judgments_path,
                                    const std::string& rejects_path, std::optional<int> expected) {
  const auto items = load_items(items_path);
  const auto judgments = load_judgments(judgments_path);
  std::vector<RejectedGeneration> rejects;
  if (!rejects_path.empty()) rejects = load_rejects(rejects_path);
  // Only items that were actually judged take part.
  std::set<std::string> judged;
  for (const auto& j : judgments) judged.insert(j.item_id);
  for (const auto& r : rejects) judged.insert(r.item_id);
  std::vector<EvaluationItem> used;
  for (const auto& item : items) {
    if (judged.count(item.id)) used.push_back(item);
  }
  return build_pools(used, judgments, expected, rejects);
}

std::map<std::string, MetaRatings> load_ratings(const fs::path& path) {
  std::map<std::string, MetaRatings> out;
  for (const auto& row : read_jsonl_rows(path)) {
    try {
      out[row.value.at("item_id").get<std::string>()][row.value.at("sample_index").get<int>()] =
          row.value.at("rating").get<int>();
    } catch (const Json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(row.line) + ": " + e.what());
    }
  }
  return out;
}

std::vector<int> judgment_predictions(const std::vector<JudgmentPool>& pools, const std::string& aggregate) {
  std::vector<int> preds;
  for (const auto& pool : pools) {
    if (pool.judgments.empty()) throw ValidationError("item '" + pool.item.id + "' has no parsed judgment");
    preds.push_back(aggregate == "mode" ? self_consistency_answer(pool) : pool.judgments.front().score);
  }
  return preds;
}

AnnotationServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-rationalizing LLM-as-a-judge toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write the synthetic reference task (train.jsonl, heldout.jsonl)");
  std::string synth_config, synth_out = "data/reference";
  synth->add_option("--config", synth_config, "ReferenceTaskConfig JSON");
  synth->add_option("--out-dir", synth_out, "Output directory");

  // init-policy
  auto* init = app.add_subcommand("init-policy", "Write an all-zero toy policy");
  std::string init_task = "pointwise", init_out;
  int init_dim = 256;
  std::uint64_t init_seed = 7;
  init->add_option("--task", init_task, "pointwise or pairwise");
  init->add_option("--feature-dim", init_dim, "Hashed feature dimension");
  init->add_option("--feature-seed", init_seed, "Feature hashing seed");
  init->add_option("--out", init_out, "Policy path")->required();

  // generate
  auto* gen = app.add_subcommand("generate", "Sample N judgments per item");
  BackendArgs gen_backend;
  std::string gen_items, gen_out, gen_rejects, gen_templates;
  GenerateOptions gen_opts;
  add_backend_options(gen, gen_backend);
  gen->add_option("--items", gen_items, "EvaluationItem JSONL")->required();
  gen->add_option("--out", gen_out, "Judgment JSONL")->required();
  gen->add_option("--rejects", gen_rejects, "Unparseable generations JSONL");
  gen->add_option("-n,--n-samples", gen_opts.n, "Samples per item");
  gen->add_option("--temperature", gen_opts.temperature, "Sampling temperature");
  gen->add_option("--max-tokens", gen_opts.max_tokens, "Completion token limit");
  gen->add_option("--seed", gen_opts.seed, "Sampling seed (mock/toy backends)");
  gen->add_option("--max-concurrent", gen_opts.max_concurrent, "Requests in flight");
  gen->add_option("--templates", gen_templates, "Directory of template overrides");

  // rate
  auto* rate = app.add_subcommand("rate", "Meta-judge ratings for existing judgments");
  BackendArgs rate_backend;
  std::string rate_items, rate_judgments, rate_out;
  GenerateOptions rate_opts;
  rate_opts.temperature = 0.0;
  add_backend_options(rate, rate_backend);
  rate->add_option("--items", rate_items, "EvaluationItem JSONL")->required();
  rate->add_option("--judgments", rate_judgments, "Judgment JSONL")->required();
  rate->add_option("--out", rate_out, "Ratings JSONL ({item_id, sample_index, rating})")->required();
  rate->add_option("--temperature", rate_opts.temperature, "Sampling temperature");
  rate->add_option("--seed", rate_opts.seed, "Sampling seed");
  rate->add_option("--max-concurrent", rate_opts.max_concurrent, "Requests in flight");

  // curate
  auto* cur = app.add_subcommand("curate", "Turn judgments into preference pairs, an SFT set, or answers");
  std::string cur_items, cur_judgments, cur_rejects, cur_ratings, cur_out, cur_kind = "pairs", cur_method = "correct_answer";
  std::string cur_cap = "4";
  CurationConfig cur_config;
  std::optional<int> cur_expected;
  cur->add_option("--items", cur_items, "EvaluationItem JSONL")->required();
  cur->add_option("--judgments", cur_judgments, "Judgment JSONL")->required();
  cur->add_option("--rejects", cur_rejects, "Rejected generation JSONL (counted as drops)");
  cur->add_option("--ratings", cur_ratings, "Meta-judge ratings JSONL (meta_judge method)");
  cur->add_option("--out", cur_out, "Output JSONL")->required();
  cur->add_option("--output", cur_kind, "pairs, sft-set or consistency-answers")
      ->check(CLI::IsMember({"pairs", "sft-set", "consistency-answers"}));
  cur->add_option("--method", cur_method, "correct_answer, majority or meta_judge");
  cur->add_option("--min-margin", cur_config.min_margin, "Minimum score margin (pointwise)");
  cur->add_option("--max-pairs-per-item", cur_cap, "Cap per item, or 'unlimited'");
  cur->add_option("--dedup-identical-scores", cur_config.dedup_identical_scores, "One pair per score combination");
  cur->add_option("--seed", cur_config.seed, "Cap sampling seed");
  cur->add_option("--iteration", cur_config.iteration, "Iteration tag for the pairs");
  cur->add_option("--expected-samples", cur_expected, "Samples per item, to count drops");

  // train
  auto* train = app.add_subcommand("train", "Train a toy policy");
  train->require_subcommand(1);
  auto* sft = train->add_subcommand("sft", "Supervised training on ground-truth labels");
  std::string sft_in, sft_items, sft_out;
  SftConfig sft_config;
  sft->add_option("--policy-in", sft_in, "Starting policy")->required();
  sft->add_option("--items", sft_items, "Labeled EvaluationItem JSONL")->required();
  sft->add_option("--out", sft_out, "Output policy")->required();
  add_dpo_options(sft, sft_config);
  auto* dpo = train->add_subcommand("dpo", "DPO on preference pairs");
  std::string dpo_in, dpo_ref, dpo_items, dpo_pairs, dpo_out;
  DpoConfig dpo_config;
  dpo->add_option("--policy-in", dpo_in, "Starting policy")->required();
  dpo->add_option("--reference", dpo_ref, "Frozen reference (default: --policy-in)");
  dpo->add_option("--items", dpo_items, "EvaluationItem JSONL")->required();
  dpo->add_option("--pairs", dpo_pairs, "Preference pair JSONL")->required();
  dpo->add_option("--out", dpo_out, "Output policy")->required();
  add_dpo_options(dpo, dpo_config);

  // merge
  auto* merge = app.add_subcommand("merge", "Interpolate two policies: alpha * a + (1 - alpha) * b");
  std::string merge_a, merge_b, merge_out;
  double merge_alpha = 0.5;
  merge->add_option("--a", merge_a, "First policy")->required();
  merge->add_option("--b", merge_b, "Second policy")->required();
  merge->add_option("--alpha", merge_alpha, "Weight of the first policy")->check(CLI::Range(0.0, 1.0));
  merge->add_option("--out", merge_out, "Output policy")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Metrics");
  ev->require_subcommand(1);
  std::string ev_items, ev_policy, ev_judgments, ev_aggregate = "first", ev_votes, ev_model;
  bool ev_equal = false;
  auto* ev_point = ev->add_subcommand("pointwise", "Exact-match accuracy, Pearson r, score-difference histogram");
  auto* ev_pair = ev->add_subcommand("pairwise", "Per-category accuracy and total");
  for (auto* c : {ev_point, ev_pair}) {
    c->add_option("--items", ev_items, "Labeled EvaluationItem JSONL")->required();
    c->add_option("--policy", ev_policy, "Toy policy (greedy predictions)");
    c->add_option("--judgments", ev_judgments, "Judgment JSONL (instead of --policy)");
    c->add_option("--aggregate", ev_aggregate, "first or mode (self-consistency)")
        ->check(CLI::IsMember({"first", "mode"}));
  }
  ev_pair->add_flag("--equal-weight", ev_equal, "Average categories equally in the total");
  auto* ev_win = ev->add_subcommand("win-rate", "Win rate of a model over an annotation vote store");
  ev_win->add_option("--votes", ev_votes, "AnnotationVote JSONL")->required();
  ev_win->add_option("--model", ev_model, "Model id")->required();

  // loop
  auto* loop = app.add_subcommand("loop", "Base -> Iter 1 -> Iter 2 ... from a loop config");
  std::string loop_config, loop_out;
  bool loop_resume = false;
  loop->add_option("--config", loop_config, "Loop config JSON")->required();
  loop->add_option("--output-dir", loop_out, "Overrides output_dir");
  loop->add_flag("--resume", loop_resume, "Skip stages already completed in the output directory");

  // annotate
  auto* ann = app.add_subcommand("annotate", "Blind side-by-side rationale annotation");
  ann->require_subcommand(1);
  auto* ann_build = ann->add_subcommand("build", "Tasks for items both models scored the same");
  std::string ab_a, ab_b, ab_model_a = "model-a", ab_model_b = "model-b", ab_items, ab_out;
  std::uint64_t ab_seed = 0;
  ann_build->add_option("--judgments-a", ab_a, "Model A judgments")->required();
  ann_build->add_option("--judgments-b", ab_b, "Model B judgments")->required();
  ann_build->add_option("--model-a", ab_model_a, "Model A id");
  ann_build->add_option("--model-b", ab_model_b, "Model B id");
  ann_build->add_option("--items", ab_items, "EvaluationItem JSONL")->required();
  ann_build->add_option("--seed", ab_seed, "Layout seed");
  ann_build->add_option("--out", ab_out, "Task JSONL")->required();
  auto* ann_serve = ann->add_subcommand("serve", "Serve the annotation API");
  std::string as_tasks, as_store, as_host = "127.0.0.1", as_static;
  std::vector<std::string> as_allow;
  int as_port = 8080;
  std::uint64_t as_order_seed = 0;
  ann_serve->add_option("--tasks", as_tasks, "Task JSONL")->required();
  ann_serve->add_option("--store", as_store, "Vote store JSONL (append-only)")->required();
  ann_serve->add_option("--port", as_port, "Port");
  ann_serve->add_option("--host", as_host, "Bind address");
  ann_serve->add_option("--allow", as_allow, "Allowed annotator ids, comma separated (default: anyone)")->delimiter(',');
  ann_serve->add_option("--order-seed", as_order_seed, "Per-annotator task order seed");
  ann_serve->add_option("--static", as_static, "Directory served at / (annotation UI)");

  // report
  auto* rep = app.add_subcommand("report", "Held-out metrics per stage for one or more runs");
  std::vector<std::string> rep_manifests;
  rep->add_option("manifests", rep_manifests, "manifest.json files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      ReferenceTaskConfig c;
      if (!synth_config.empty()) c = reference_task_config_from_json(read_json_file(synth_config));
      const auto task = make_reference_task(c);
      write_records(fs::path(synth_out) / "train.jsonl", task.train);
      write_records(fs::path(synth_out) / "heldout.jsonl", task.heldout);
      print(Json{{"train", task.train.size()}, {"heldout", task.heldout.size()}, {"out_dir", synth_out}});
    } else if (*init) {
      const auto p = ToyPolicy::zeros(parse_task_type(init_task), init_dim, init_seed);
      save_policy(init_out, p);
      print(Json{{"policy", init_out}, {"checksum", p.checksum()}});
    } else if (*gen) {
      const auto backend = gen_backend.make();
      std::optional<PromptTemplates> templates;
      if (!gen_templates.empty()) templates = PromptTemplates::with_overrides(gen_templates);
      gen_opts.templates = templates ? &*templates : nullptr;
      const auto outcome = generate_judgments(*backend, load_items(gen_items), gen_opts);
      write_records(gen_out, outcome.judgments);
      if (!gen_rejects.empty()) write_records(gen_rejects, outcome.rejects);
      print(Json{{"judgments", outcome.judgments.size()},
                 {"rejected", outcome.rejects.size()},
                 {"failed_requests", outcome.failed_requests}});
    } else if (*rate) {
      const auto backend = rate_backend.make();
      const auto pools = pools_for(rate_items, rate_judgments, "", std::nullopt);
      std::vector<RejectedGeneration> unrated;
      const auto ratings = meta_rate(*backend, pools, rate_opts, &unrated);
      std::vector<Json> rows;
      for (const auto& [item_id, per] : ratings) {
        for (const auto& [index, r] : per) rows.push_back(Json{{"item_id", item_id}, {"sample_index", index}, {"rating", r}});
      }
      write_jsonl(rate_out, rows);
      print(Json{{"ratings", rows.size()}, {"unrated", unrated.size()}});
    } else if (*cur) {
      cur_config.method = parse_curation_method(cur_method);
      cur_config.max_pairs_per_item =
          cur_cap == "unlimited" ? std::nullopt : std::optional<int>(std::stoi(cur_cap));
      cur_config.validate();
      const auto pools = pools_for(cur_items, cur_judgments, cur_rejects, cur_expected);
      if (cur_kind == "pairs") {
        std::map<std::string, MetaRatings> ratings;
        if (!cur_ratings.empty()) ratings = load_ratings(cur_ratings);
        CurationSummary summary;
        const auto pairs = curate_pools(pools, cur_config, cur_ratings.empty() ? nullptr : &ratings, &summary);
        write_records(cur_out, pairs);
        print(to_json(summary));
      } else if (cur_kind == "sft-set") {
        std::vector<Json> rows;
        for (const auto& pool : pools) {
          for (const auto& r : select_best_of_n(pool)) rows.push_back(to_json(r));
        }
        write_jsonl(cur_out, rows);
        print(Json{{"sft_records", rows.size()}});
      } else {
        std::vector<Json> rows;
        for (const auto& pool : pools) {
          if (pool.judgments.empty()) continue;
          rows.push_back(Json{{"item_id", pool.item.id}, {"answer", self_consistency_answer(pool)},
                              {"votes", pool.judgments.size()}});
        }
        write_jsonl(cur_out, rows);
        print(Json{{"answers", rows.size()}});
      }
    } else if (*sft) {
      const ToyPolicy start = load_policy(sft_in);
      std::vector<EvaluationItem> labeled;
      std::vector<int> targets;
      for (const auto& item : load_items(sft_items)) {
        if (item.task_type == start.task_type && item.has_ground_truth()) {
          targets.push_back(*item.ground_truth());
          labeled.push_back(item);
        }
      }
      TrainStats stats;
      const auto p = sft_train(start, make_sft_examples(start, labeled, targets), sft_config, &stats);
      save_policy(sft_out, p);
      print(to_json(stats));
    } else if (*dpo) {
      const ToyPolicy start = load_policy(dpo_in);
      const ToyPolicy reference = dpo_ref.empty() ? start : load_policy(dpo_ref);
      const auto examples = make_dpo_examples(start, load_items(dpo_items), load_pairs(dpo_pairs));
      TrainStats stats;
      const auto p = dpo_train(start, reference, examples, dpo_config, &stats);
      save_policy(dpo_out, p);
      print(to_json(stats));
    } else if (*merge) {
      const auto p = merge_policies(load_policy(merge_a), load_policy(merge_b), merge_alpha);
      save_policy(merge_out, p);
      print(Json{{"policy", merge_out}, {"checksum", p.checksum()}});
    } else if (*ev_point || *ev_pair) {
      if (ev_policy.empty() == ev_judgments.empty()) throw ValidationError("give exactly one of --policy, --judgments");
      const TaskType task = *ev_point ? TaskType::pointwise : TaskType::pairwise;
      std::vector<EvaluationItem> items;
      for (const auto& item : load_items(ev_items)) {
        if (item.task_type == task && item.has_ground_truth()) items.push_back(item);
      }
      std::vector<int> preds;
      if (!ev_policy.empty()) {
        preds = predict_greedy(load_policy(ev_policy), items);
      } else {
        const auto pools = build_pools(items, load_judgments(ev_judgments));
        preds = judgment_predictions(pools, ev_aggregate);
      }
      if (*ev_point) {
        std::vector<int> truths;
        for (const auto& item : items) truths.push_back(*item.ground_truth());
        print(to_json(pointwise_report(preds, truths)));
      } else {
        for (auto& item : items) {
          if (!item.category) item.category = "uncategorized";
        }
        print(to_json(pairwise_report(items, preds, ev_equal)));
      }
    } else if (*ev_win) {
      print(to_json(win_rate(VoteStore(ev_votes).votes(), ev_model)));
    } else if (*loop) {
      LoopConfig config = load_loop_config(loop_config);
      if (!loop_out.empty()) {
        config.output_dir = loop_out;
        config.raw["output_dir"] = loop_out;
      }
      const auto manifest = run_loop(config, LoopOptions{loop_resume});
      Json summary = Json::array();
      for (const auto& stage : manifest.stages) {
        summary.push_back(Json{{"stage", stage.at("stage")},
                               {"iteration", stage.value("iteration", 0)},
                               {"policy_checksum", stage.at("policy_checksum")},
                               {"heldout", stage.at("metrics").at("heldout")}});
      }
      print(Json{{"run_id", manifest.run_id}, {"status", manifest.status}, {"stages", summary}});
    } else if (*ann_build) {
      const auto tasks = build_annotation_tasks(load_judgments(ab_a), ab_model_a, load_judgments(ab_b), ab_model_b,
                                                load_items(ab_items), ab_seed);
      write_annotation_tasks(ab_out, tasks);
      print(Json{{"tasks", tasks.size()}});
    } else if (*ann_serve) {
      AnnotationServiceOptions options;
      options.order_seed = as_order_seed;
      if (!as_allow.empty()) options.allowed_annotators = std::set<std::string>(as_allow.begin(), as_allow.end());
      AnnotationService service(load_annotation_tasks(as_tasks), as_store, options);
      AnnotationServer server(service, as_static.empty() ? std::nullopt : std::optional<fs::path>(as_static));
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::cerr << "annotation API on http://" << as_host << ":" << as_port << "\n";
      server.listen(as_host, as_port);
    } else if (*rep) {
      for (const auto& path : rep_manifests) {
        const auto m = RunManifest::from_json(read_json_file(path));
        std::vector<std::pair<std::string, PointwiseReport>> point_rows;
        std::vector<std::pair<std::string, PairwiseReport>> pair_rows;
        for (const auto& stage : m.stages) {
          const Json& h = stage.at("metrics").at("heldout");
          if (h.is_null()) continue;
          const std::string label =
              stage.at("stage") == "base" ? "Base" : "Iter " + std::to_string(stage.at("iteration").get<int>());
          if (h.contains("accuracy")) {
            PointwiseReport r;
            r.n = h.at("n");
            r.accuracy = h.at("accuracy");
            if (!h.at("pearson_r").is_null()) r.pearson_r = h.at("pearson_r").get<double>();
            point_rows.emplace_back(label, r);
          } else {
            PairwiseReport r;
            for (const auto& [cat, v] : h.at("per_category").items()) r.per_category[cat] = v.at("accuracy");
            r.total = h.at("total");
            pair_rows.emplace_back(label, r);
          }
        }
        std::cout << "# " << path << " (" << m.run_id << ", " << m.status << ")\n";
        if (!point_rows.empty()) std::cout << render_pointwise_table(point_rows);
        if (!pair_rows.empty()) std::cout << render_pairwise_table(pair_rows);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
