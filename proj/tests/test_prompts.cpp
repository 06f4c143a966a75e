#include "doctest.h"
#include "helpers.hpp"
#include "sre/error.hpp"
#include "sre/prompts.hpp"

using namespace sre;

namespace {

std::string golden(const std::string& name) { return read_text_file(test::golden_dir() / name); }

EvaluationItem golden_item(const std::string& id) {
  for (const auto& item : load_items(test::golden_dir() / "items.jsonl")) {
    if (item.id == id) return item;
  }
  throw Error("missing golden item " + id);
}

}  // namespace

TEST_SUITE("prompts") {
  TEST_CASE("pointwise matches the golden rendering") {
    const auto b = render_pointwise(golden_item("golden-pointwise"));
    CHECK(b.system == golden("pointwise_system.golden"));
    CHECK(b.user == golden("pointwise_user.golden"));
    CHECK(b.expected_format == OutputFormat::likert_1_5);
    CHECK(b.system.find("\"(write a rationale for criteria) [RESULT] (1-5)\"") != std::string::npos);
    CHECK(b.user.ends_with("\"(write a rationale for criteria) [RESULT] (1-5)\""));
  }

  TEST_CASE("pairwise matches the golden rendering") {
    const auto b = render_pairwise(golden_item("golden-pairwise"));
    CHECK(b.system == golden("pairwise_system.golden"));
    CHECK(b.user == golden("pairwise_user.golden"));
    CHECK(b.expected_format == OutputFormat::choice_1_2);
    CHECK(b.user.ends_with("[RESULT] (1 or 2)\""));
  }

  TEST_CASE("meta-judge matches the golden rendering") {
    const auto j = load_judgments(test::golden_dir() / "judgment.jsonl").at(0);
    const auto b = render_meta_judge(golden_item("golden-pointwise"), j);
    CHECK(b.system == golden("meta_judge_system.golden"));
    CHECK(b.user == golden("meta_judge_user.golden"));
    CHECK(b.expected_format == OutputFormat::meta_rating_1_5);
    CHECK(b.user.find("**Judgment rating: <judgment rating>**") != std::string::npos);
    CHECK(b.user.find(j.raw_text) != std::string::npos);
  }

  TEST_CASE("reward bench criteria") {
    const auto c = default_reward_bench_criteria();
    REQUIRE(c.entries.size() == 5);
    CHECK(c.entries[0].description.starts_with("The response is misleading, harmful, or dishonest"));
    for (int i = 0; i < 5; ++i) CHECK(c.entries[static_cast<std::size_t>(i)].score == i + 1);
    CHECK(c == default_reward_bench_criteria());
    std::string joined;
    for (const auto& line : criteria_lines(c)) joined += (joined.empty() ? "" : "\n") + line;
    CHECK(joined == golden("reward_bench_criteria.golden"));
  }

  TEST_CASE("empty conversation leaves the block empty") {
    auto item = test::pointwise_item("a");
    item.conversation.clear();
    const auto b = render_pointwise(item);
    CHECK(b.user.find("<BEGIN CONVERSATION PREFIX>\n<END CONVERSATION PREFIX>") != std::string::npos);
  }

  TEST_CASE("rendering is deterministic") {
    const auto item = golden_item("golden-pairwise");
    CHECK(render_pairwise(item) == render_pairwise(item));
    CHECK(render_pointwise(golden_item("golden-pointwise")) == render_pointwise(golden_item("golden-pointwise")));
  }

  TEST_CASE("swapping responses swaps only the response blocks") {
    auto item = golden_item("golden-pairwise");
    const auto before = render_pairwise(item).user;
    std::swap(item.response_1, item.response_2);
    const auto after = render_pairwise(item).user;
    const std::string r1 = "assistant: " + item.response_2->content;  // original response 1
    const std::string r2 = "assistant: " + item.response_1->content;
    std::string expected = before;
    const auto p1 = expected.find(r1);
    expected.replace(p1, r1.size(), r2);
    const auto p2 = expected.find(r2, p1 + r2.size());
    expected.replace(p2, r2.size(), r1);
    CHECK(after == expected);
  }

  TEST_CASE("meta-judge with an empty judgment renders an empty body") {
    auto j = test::judgment("golden-pointwise", 0, 3);
    j.rationale.clear();
    j.raw_text.clear();
    const auto b = render_meta_judge(golden_item("golden-pointwise"), j);
    CHECK(b.user.find("<BEGIN JUDGMENT>  \n  \n<END JUDGMENT>") != std::string::npos);
  }

  TEST_CASE("wrong task type and mismatched judgment are errors") {
    CHECK_THROWS_AS(render_pointwise(test::pairwise_item("p")), ValidationError);
    CHECK_THROWS_AS(render_pairwise(test::pointwise_item("a")), ValidationError);
    CHECK_THROWS_AS(render_meta_judge(test::pointwise_item("a"), test::judgment("b", 0, 3)), ValidationError);
    auto bad = test::pointwise_item("a");
    bad.criteria.entries.pop_back();
    CHECK_THROWS_AS(render_pointwise(bad), ValidationError);
  }

  TEST_CASE("template engine") {
    TemplateContext ctx;
    ctx.scalars["name"] = "x";
    ctx.lists["rows"] = {{{"v", "1"}}, {{"v", "2"}}};
    CHECK(render_template("a {{ name }}\n{% for r in rows %}\n- {{r.v}}\n{% endfor %}\nend\n", ctx) ==
          "a x\n- 1\n- 2\nend");
    CHECK_THROWS_AS(render_template("{{ missing }}", ctx), ValidationError);
    CHECK_THROWS_AS(render_template("{% for r in rows %}\nopen", ctx), ValidationError);
  }

  TEST_CASE("template overrides from a directory") {
    test::TempDir dir;
    write_text_file(dir / "pointwise_system.txt", "custom system\n");
    const auto t = PromptTemplates::with_overrides(dir.path());
    CHECK(t.pointwise_system == "custom system");
    CHECK(t.pairwise_system == PromptTemplates::defaults().pairwise_system);
  }
}
