#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "sre/error.hpp"
#include "sre/loop.hpp"

using namespace sre;
namespace fs = std::filesystem;

namespace {

Json small_config(const fs::path& out, int iterations = 2) {
  Json c{{"seed", 5},
         {"created_at", "2024-10-01T00:00:00Z"},
         {"output_dir", out.string()},
         {"synthetic", {{"train_count", 200}, {"heldout_count", 100}, {"seed", 3}}},
         {"base", {{"sft_sample_count", 50}, {"feature_dim", 64}, {"sft", {{"learning_rate", 2.0}, {"epochs", 3}}}}},
         {"iterations", Json::array()}};
  for (int i = 0; i < iterations; ++i) {
    c["iterations"].push_back(Json{{"sample_count", i == 0 ? 60 : 20},
                                   {"n_samples", 6},
                                   {"curation", {{"method", "correct_answer"}, {"min_margin", 1}}},
                                   {"dpo", {{"beta", 0.5}, {"learning_rate", 1.0}}}});
  }
  return c;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

}  // namespace

TEST_SUITE("loop") {
  TEST_CASE("two iterations write three policies and two pair files") {
    test::TempDir dir;
    const auto manifest = run_loop(loop_config_from_json(small_config(dir / "run")));
    CHECK(manifest.status == "complete");
    REQUIRE(manifest.stages.size() == 3);
    CHECK(manifest.iterations().size() == 2);
    std::set<std::string> policies, pairs;
    for (const auto& s : manifest.stages) {
      policies.insert(s.at("policy_path").get<std::string>());
      if (s.contains("pairs_path")) pairs.insert(s.at("pairs_path").get<std::string>());
      CHECK(s.at("metrics").at("heldout").at("n") == 100);
    }
    CHECK(policies.size() == 3);
    CHECK(pairs.size() == 2);
    for (const auto& p : policies) CHECK(fs::exists(dir / "run" / p));
    for (const auto& p : pairs) CHECK(fs::exists(dir / "run" / p));
    // the reference of iteration t is the policy that left iteration t-1
    CHECK(manifest.stages[1].at("reference_checksum") == manifest.stages[0].at("policy_checksum"));
    CHECK(manifest.stages[2].at("reference_checksum") == manifest.stages[1].at("policy_checksum"));
    CHECK(manifest.stages[2].at("reference_checksum_after") == manifest.stages[1].at("policy_checksum"));
    const auto on_disk = RunManifest::from_json(Json::parse(slurp(dir / "run" / "manifest.json")));
    CHECK(on_disk.to_json() == manifest.to_json());
    CHECK(on_disk.loop_config == small_config(dir / "run"));
  }

  TEST_CASE("no iterations") {
    test::TempDir dir;
    const auto manifest = run_loop(loop_config_from_json(small_config(dir / "run", 0)));
    REQUIRE(manifest.stages.size() == 1);
    CHECK(manifest.stages[0].at("stage") == "base");
    CHECK(manifest.stages[0].at("metrics").at("heldout").contains("accuracy"));
  }

  TEST_CASE("identical configs give identical bytes") {
    test::TempDir a, b;
    Json ca = small_config(a / "run");
    Json cb = small_config(b / "run");
    cb["output_dir"] = ca["output_dir"];  // run_id covers the config, so keep it equal
    run_loop(loop_config_from_json(ca));
    fs::rename(a / "run", a / "first");
    run_loop(loop_config_from_json(cb));
    for (const char* f : {"manifest.json", "base/policy.json", "iter_1/pairs.jsonl", "iter_1/policy.json",
                          "iter_1/judgments.jsonl", "iter_2/pairs.jsonl", "iter_2/policy.json"}) {
      CHECK_MESSAGE(slurp(a / "first" / f) == slurp(a / "run" / f), f);
    }
  }

  TEST_CASE("sample_count 0 leaves the policy unchanged") {
    test::TempDir dir;
    const auto policy = ToyPolicy::zeros(TaskType::pointwise, 32, 7);
    IterationSpec spec;
    spec.sample_count = 0;
    IterationContext ctx;
    ctx.output_dir = dir.path();
    std::vector<EvaluationItem> seed{test::pointwise_item("a"), test::pointwise_item("b")};
    const auto result = run_iteration(policy, spec, seed, ctx);
    CHECK(result.policy == policy);
    CHECK(result.pairs.empty());
    CHECK(result.judgments.empty());
    CHECK_FALSE(result.train_stats.has_value());
    CHECK(fs::file_size(dir / "iter_1/pairs.jsonl") == 0);
  }

  TEST_CASE("scripted separable pairs lower the DPO loss") {
    test::TempDir dir;
    std::vector<EvaluationItem> seed;
    std::vector<std::pair<std::string, MockBackend::Entry>> script;
    for (int i = 0; i < 8; ++i) {
      const std::string id = "m" + std::to_string(i);
      seed.push_back(test::pointwise_item(id, 5, "response number " + std::to_string(i)));
      script.push_back({id, MockBackend::Entry{{"good [RESULT] 5", "bad [RESULT] 1", "meh [RESULT] 2"}, std::nullopt}});
    }
    MockBackend mock(script);
    const auto policy = ToyPolicy::zeros(TaskType::pointwise, 32, 7);
    IterationSpec spec;
    spec.sample_count = seed.size();
    spec.n_samples = 3;
    spec.curation.max_pairs_per_item.reset();
    spec.dpo.epochs = 5;
    spec.dpo.learning_rate = 1.0;
    IterationContext ctx;
    ctx.output_dir = dir.path();
    ctx.backend = &mock;
    const auto result = run_iteration(policy, spec, seed, ctx);
    REQUIRE(result.pairs.size() == 16);
    double before = 0, after = 0;
    std::map<std::string, EvaluationItem> by_id;
    for (const auto& it : seed) by_id[it.id] = it;
    for (const auto& p : result.pairs) {
      before += dpo_loss(policy, policy, by_id[p.item_id], p, spec.dpo.beta);
      after += dpo_loss(result.policy, policy, by_id[p.item_id], p, spec.dpo.beta);
    }
    CHECK(after < before);
    CHECK(load_pairs(dir / "iter_1/pairs.jsonl") == result.pairs);
  }

  TEST_CASE("unparseable generations are counted, not paired") {
    test::TempDir dir;
    std::vector<EvaluationItem> seed{test::pointwise_item("a", 4)};
    MockBackend mock({{"a", MockBackend::Entry{{"x [RESULT] 4", "no marker", "y [RESULT] 1"}, std::nullopt}}});
    IterationSpec spec;
    spec.sample_count = 1;
    spec.n_samples = 3;
    IterationContext ctx;
    ctx.output_dir = dir.path();
    ctx.backend = &mock;
    const auto r = run_iteration(ToyPolicy::zeros(TaskType::pointwise, 16, 7), spec, seed, ctx);
    CHECK(r.judgments.size() == 2);
    REQUIRE(r.rejects.size() == 1);
    CHECK(r.rejects[0].error == "MissingMarker");
    CHECK(r.curation.judgments_dropped == 1);
    CHECK(r.pairs.size() == 1);
  }

  TEST_CASE("a failing stage is named in the manifest") {
    test::TempDir dir;
    write_text_file(dir / "script.jsonl", "{\"match\":\"*\",\"error\":\"server on fire\"}\n");
    Json c = small_config(dir / "run", 1);
    c["backend"] = Json{{"kind", "mock"}, {"mock", {{"script_path", (dir / "script.jsonl").string()}}}};
    CHECK_THROWS_AS(run_loop(loop_config_from_json(c)), Error);
    const auto m = RunManifest::from_json(Json::parse(slurp(dir / "run" / "manifest.json")));
    CHECK(m.status == "failed");
    CHECK(*m.failed_stage == "iteration 1: generate");
    CHECK(m.error->find("server on fire") != std::string::npos);
    CHECK(m.stages.size() == 1);  // the base stage completed
  }

  TEST_CASE("resume skips completed stages and reproduces the rest") {
    test::TempDir dir;
    const Json c = small_config(dir / "run");
    const auto full = run_loop(loop_config_from_json(c));
    const std::string iter2_policy = slurp(dir / "run" / "iter_2/policy.json");
    // drop the last stage and resume
    fs::remove_all(dir / "run" / "iter_2");
    const auto resumed = run_loop(loop_config_from_json(c), LoopOptions{true});
    CHECK(resumed.to_json() == full.to_json());
    CHECK(slurp(dir / "run" / "iter_2/policy.json") == iter2_policy);

    Json other = c;
    other["seed"] = 6;
    CHECK_THROWS_AS(run_loop(loop_config_from_json(other), LoopOptions{true}), ValidationError);
  }

  TEST_CASE("disjoint iterations never reuse an item") {
    test::TempDir dir;
    Json c = small_config(dir / "run");
    c["disjoint_iterations"] = true;
    c["iterations"][1]["sample_count"] = 140;
    run_loop(loop_config_from_json(c));
    std::set<std::string> first;
    for (const auto& j : load_judgments(dir / "run" / "iter_1/judgments.jsonl")) first.insert(j.item_id);
    for (const auto& j : load_judgments(dir / "run" / "iter_2/judgments.jsonl")) CHECK(first.count(j.item_id) == 0);
  }

  TEST_CASE("meta-judge curation through the toy backend") {
    test::TempDir dir;
    Json c = small_config(dir / "run", 1);
    c["iterations"][0]["curation"] = Json{{"method", "meta_judge"}, {"min_margin", 1}};
    const auto m = run_loop(loop_config_from_json(c));
    CHECK(m.stages[1].at("pair_count").get<int>() > 0);
    for (const auto& p : load_pairs(dir / "run" / "iter_1/pairs.jsonl")) CHECK(p.method == CurationMethod::meta_judge);
  }

  TEST_CASE("config errors") {
    CHECK_THROWS_AS(loop_config_from_json(Json{{"iterations", Json::array()}}), ValidationError);
    Json c = small_config("x");
    c["iterations"][0]["curation"]["min_margin"] = 9;
    CHECK_THROWS_AS(loop_config_from_json(c), ValidationError);
  }

  TEST_CASE("relative data paths resolve against the config directory") {
    test::TempDir dir;
    fs::create_directories(dir / "cfg" / "data");
    write_records(dir / "cfg" / "data" / "seed.jsonl",
                  std::vector<EvaluationItem>{test::pointwise_item("a"), test::pointwise_item("b")});
    write_text_file(dir / "cfg" / "loop.json",
                    Json{{"seed_dataset_path", "data/seed.jsonl"}, {"output_dir", (dir / "out").string()}}.dump());
    const auto c = load_loop_config(dir / "cfg" / "loop.json");
    CHECK(*c.seed_dataset_path == dir / "cfg" / "data" / "seed.jsonl");
    const auto m = run_loop(c);
    CHECK(m.stages.size() == 1);
    CHECK(m.stages[0].at("metrics").at("heldout").is_null());
  }
}
