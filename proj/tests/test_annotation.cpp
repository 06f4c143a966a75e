#include <thread>

#include "doctest.h"
#include "helpers.hpp"
#include "httplib.h"
#include "sre/annotation.hpp"
#include "sre/error.hpp"

using namespace sre;

namespace {

// n tasks, model-a vs model-b, alternating benchmarks
std::vector<AnnotationTask> make_tasks(int n, std::uint64_t seed = 11) {
  std::vector<EvaluationItem> items;
  std::vector<JudgmentRecord> ja, jb;
  for (int i = 0; i < n; ++i) {
    auto item = test::pointwise_item("it" + std::to_string(i));
    item.benchmark = i % 2 ? "reward-bench" : "helpsteer2";
    items.push_back(item);
    ja.push_back(test::judgment(item.id, 0, 3, "alpha reasoning " + std::to_string(i)));
    jb.push_back(test::judgment(item.id, 0, 3, "beta reasoning " + std::to_string(i)));
  }
  return build_annotation_tasks(ja, "model-a", jb, "model-b", items, seed);
}

std::string vote_body(const std::string& task, const std::string& who, const std::string& choice) {
  return Json{{"task_id", task}, {"annotator_id", who}, {"choice", choice}, {"reasons", {"clearer"}}}.dump();
}

bool mentions_model(const std::string& body) {
  return body.find("model-a") != std::string::npos || body.find("model-b") != std::string::npos;
}

}  // namespace

TEST_SUITE("annotation") {
  TEST_CASE("only equal-score items become tasks") {
    std::vector<EvaluationItem> items{test::pointwise_item("x"), test::pointwise_item("y"),
                                      test::pointwise_item("z")};
    std::vector<JudgmentRecord> ja{test::judgment("x", 0, 4), test::judgment("y", 0, 2), test::judgment("z", 1, 5),
                                   test::judgment("z", 0, 1)};
    std::vector<JudgmentRecord> jb{test::judgment("x", 0, 4), test::judgment("y", 0, 3), test::judgment("z", 0, 1)};
    const auto tasks = build_annotation_tasks(ja, "m1", jb, "m2", items, 1);
    REQUIRE(tasks.size() == 2);
    CHECK(tasks[0].item_id == "x");
    CHECK(tasks[0].task_id == "task-00000");
    CHECK(tasks[1].item_id == "z");  // lowest sample index of each model
    CHECK(tasks[1].candidates[0].score == 1);

    CHECK_THROWS_AS(build_annotation_tasks(ja, "m1", {test::judgment("q", 0, 1)}, "m2", items, 1), ValidationError);
  }

  TEST_CASE("task files round trip") {
    test::TempDir dir;
    const auto tasks = make_tasks(4);
    write_annotation_tasks(dir / "tasks.jsonl", tasks);
    const auto back = load_annotation_tasks(dir / "tasks.jsonl");
    REQUIRE(back.size() == tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) CHECK(to_json(back[i]) == to_json(tasks[i]));
  }

  TEST_CASE("left placement is balanced") {
    const auto tasks = make_tasks(100);
    int left = 0, total = 0;
    for (int a = 0; a < 10; ++a) {
      for (const auto& t : tasks) {
        left += model_a_on_left(t, "annotator-" + std::to_string(a));
        ++total;
      }
    }
    REQUIRE(total == 1000);
    CHECK(left >= 450);
    CHECK(left <= 550);
    // stable for one annotator
    CHECK(model_a_on_left(tasks[3], "ann") == model_a_on_left(tasks[3], "ann"));
  }

  TEST_CASE("task order is a per-annotator permutation") {
    const auto tasks = make_tasks(20);
    auto a = annotator_task_order(tasks, "a", 3);
    auto b = annotator_task_order(tasks, "b", 3);
    CHECK(a == annotator_task_order(tasks, "a", 3));
    CHECK(a != b);
    std::sort(a.begin(), a.end());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == i);
  }

  TEST_CASE("next task, done sentinel and progress") {
    test::TempDir dir;
    AnnotationService svc(make_tasks(3), dir / "votes.jsonl");
    for (int k = 0; k < 3; ++k) {
      const auto r = svc.next_task("ann");
      REQUIRE(r.status == 200);
      CHECK(r.body["done"] == false);
      CHECK(r.body["progress"]["completed"] == k);
      CHECK(r.body["progress"]["total"] == 3);
      const auto id = r.body["task"]["task_id"].get<std::string>();
      CHECK(svc.submit_vote(vote_body(id, "ann", "left")).status == 201);
    }
    const auto done = svc.next_task("ann");
    CHECK(done.body["done"] == true);
    CHECK(done.body["task"].is_null());
    CHECK(done.body["progress"]["completed"] == 3);
  }

  TEST_CASE("duplicate votes are refused and not stored") {
    test::TempDir dir;
    AnnotationService svc(make_tasks(2), dir / "votes.jsonl");
    const auto id = svc.tasks()[0].task_id;
    CHECK(svc.submit_vote(vote_body(id, "ann", "tie")).status == 201);
    const auto bytes = read_text_file(dir / "votes.jsonl");
    const auto dup = svc.submit_vote(vote_body(id, "ann", "right"));
    CHECK(dup.status == 409);
    CHECK(read_text_file(dir / "votes.jsonl") == bytes);
    CHECK(svc.store().votes().size() == 1);
  }

  TEST_CASE("malformed votes name the offending fields") {
    test::TempDir dir;
    AnnotationService svc(make_tasks(2), dir / "votes.jsonl");
    const auto id = svc.tasks()[0].task_id;
    auto r = svc.submit_vote("{not json");
    CHECK(r.status == 400);
    r = svc.submit_vote(Json{{"task_id", id}, {"choice", "sideways"}, {"reasons", "x"}, {"left_model", "m"}}.dump());
    CHECK(r.status == 400);
    CHECK(r.body["fields"].contains("annotator_id"));
    CHECK(r.body["fields"].contains("choice"));
    CHECK(r.body["fields"].contains("reasons"));
    CHECK(r.body["fields"].contains("left_model"));
    CHECK_FALSE(r.body["fields"].contains("task_id"));
    r = svc.submit_vote(vote_body("task-99999", "ann", "left"));
    CHECK(r.status == 400);
    CHECK(r.body["fields"].contains("task_id"));
    CHECK(svc.store().votes().empty());
  }

  TEST_CASE("allow-list") {
    test::TempDir dir;
    AnnotationServiceOptions opts;
    opts.allowed_annotators = std::set<std::string>{"alice"};
    AnnotationService svc(make_tasks(2), dir / "votes.jsonl", opts);
    CHECK(svc.next_task("mallory").status == 403);
    CHECK(svc.submit_vote(vote_body(svc.tasks()[0].task_id, "mallory", "left")).status == 403);
    CHECK(svc.next_task("alice").status == 200);
  }

  TEST_CASE("scripted session matches offline win rate and survives a restart") {
    test::TempDir dir;
    const auto tasks = make_tasks(20);
    AnnotationResponse results;
    {
      AnnotationService svc(tasks, dir / "votes.jsonl");
      const char* choices[] = {"left", "right", "tie"};
      int k = 0;
      for (const std::string who : {"a1", "a2", "a3"}) {
        while (true) {
          const auto next = svc.next_task(who);
          CHECK_FALSE(mentions_model(next.body.dump()));
          if (next.body["done"] == true) break;
          const auto r = svc.submit_vote(vote_body(next.body["task"]["task_id"], who, choices[k++ % 7 % 3]));
          REQUIRE(r.status == 201);
          CHECK_FALSE(mentions_model(r.body.dump()));
        }
      }
      results = svc.results();
    }
    VoteStore reopened(dir / "votes.jsonl");
    const auto votes = reopened.votes();
    REQUIRE(votes.size() == 60);
    const auto wa = win_rate(votes, "model-a");
    const auto wb = win_rate(votes, "model-b");
    CHECK(results.body["votes"] == 60);
    CHECK(results.body["annotators"]["a2"] == 20);
    CHECK(results.body["win_rates"]["A"] == to_json(wa));
    CHECK(results.body["win_rates"]["B"] == to_json(wb));
    CHECK(wa.overall + wb.overall == doctest::Approx(1.0));
    CHECK(wa.per_benchmark.size() == 2);
    CHECK_FALSE(mentions_model(results.body.dump()));

    AnnotationService again(tasks, dir / "votes.jsonl");
    CHECK(again.next_task("a1").body["done"] == true);
    CHECK(again.results().body == results.body);
  }

  TEST_CASE("recorded sides follow the annotator's layout") {
    test::TempDir dir;
    AnnotationService svc(make_tasks(10), dir / "votes.jsonl");
    for (const auto& t : svc.tasks()) REQUIRE(svc.submit_vote(vote_body(t.task_id, "z", "left")).status == 201);
    for (const auto& v : svc.store().votes()) {
      const auto& t = svc.tasks()[std::stoi(v.task_id.substr(5))];
      CHECK(v.left_model == (model_a_on_left(t, "z") ? "model-a" : "model-b"));
      CHECK(v.benchmark == t.benchmark);
      CHECK_FALSE(v.timestamp.empty());
    }
  }

  TEST_CASE("blind view shows the left rationale for the annotator") {
    test::TempDir dir;
    AnnotationService svc(make_tasks(1), dir / "votes.jsonl");
    const auto& t = svc.tasks()[0];
    const auto task = svc.next_task("viewer").body["task"];
    const bool a_left = model_a_on_left(t, "viewer");
    CHECK(task["rationale_left"] == t.candidates[a_left ? 0 : 1].rationale);
    CHECK(task["rationale_right"] == t.candidates[a_left ? 1 : 0].rationale);
    CHECK(task["score"] == 3);
  }

  TEST_CASE("over HTTP") {
    test::TempDir dir;
    AnnotationService svc(make_tasks(4), dir / "votes.jsonl");
    AnnotationServer server(svc);
    const int port = server.start("127.0.0.1", 0);
    REQUIRE(port > 0);
    httplib::Client cli("127.0.0.1", port);

    auto health = cli.Get("/api/health");
    REQUIRE(health);
    CHECK(health->status == 200);

    auto next = cli.Get("/api/tasks/next?annotator=web");
    REQUIRE(next);
    CHECK(next->status == 200);
    CHECK_FALSE(mentions_model(next->body));
    const auto id = Json::parse(next->body)["task"]["task_id"].get<std::string>();

    auto posted = cli.Post("/api/votes", vote_body(id, "web", "right"), "application/json");
    REQUIRE(posted);
    CHECK(posted->status == 201);
    auto dup = cli.Post("/api/votes", vote_body(id, "web", "right"), "application/json");
    REQUIRE(dup);
    CHECK(dup->status == 409);
    auto bad = cli.Post("/api/votes", "{\"choice\":1}", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(Json::parse(bad->body)["fields"].contains("choice"));

    auto results = cli.Get("/api/results");
    REQUIRE(results);
    CHECK(Json::parse(results->body) == svc.results().body);
    CHECK_FALSE(mentions_model(results->body));
    server.stop();
  }
}
