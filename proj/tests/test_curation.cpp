#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "sre/curation.hpp"
#include "sre/error.hpp"
#include "sre/hashing.hpp"

using namespace sre;

namespace {

JudgmentPool make_pool(const EvaluationItem& item, const std::vector<int>& scores) {
  JudgmentPool pool{item, {}, 0};
  for (std::size_t i = 0; i < scores.size(); ++i) pool.judgments.push_back(test::judgment(item.id, static_cast<int>(i), scores[i]));
  return pool;
}

using IndexPair = std::pair<int, int>;

std::vector<IndexPair> indices(const std::vector<PreferencePairRecord>& pairs) {
  std::vector<IndexPair> out;
  for (const auto& p : pairs) out.emplace_back(p.chosen.sample_index, p.rejected.sample_index);
  return out;
}

CurationConfig uncapped(CurationMethod m, int min_margin) {
  CurationConfig c;
  c.method = m;
  c.min_margin = min_margin;
  c.max_pairs_per_item.reset();
  return c;
}

}  // namespace

TEST_SUITE("curation") {
  TEST_CASE("correct answer, margin 2") {
    const auto pool = make_pool(test::pointwise_item("a", 5), {5, 3, 5, 2});
    const auto pairs = curate_correct_answer(pool, uncapped(CurationMethod::correct_answer, 2));
    CHECK(indices(pairs) == std::vector<IndexPair>{{0, 1}, {0, 3}, {2, 1}, {2, 3}});
    std::vector<int> margins;
    for (const auto& p : pairs) margins.push_back(p.margin);
    CHECK(margins == std::vector<int>{2, 3, 2, 3});
    for (const auto& p : pairs) {
      CHECK(p.method == CurationMethod::correct_answer);
      CHECK(p.item_id == "a");
      CHECK_NOTHROW(p.validate());
    }
  }

  TEST_CASE("correct answer, margin 3") {
    const auto pool = make_pool(test::pointwise_item("a", 5), {5, 3, 5, 2});
    CHECK(indices(curate_correct_answer(pool, uncapped(CurationMethod::correct_answer, 3))) ==
          std::vector<IndexPair>{{0, 3}, {2, 3}});
  }

  TEST_CASE("all correct gives nothing") {
    const auto pool = make_pool(test::pointwise_item("a", 4), {4, 4, 4});
    CHECK(curate_correct_answer(pool, uncapped(CurationMethod::correct_answer, 1)).empty());
  }

  TEST_CASE("correct answer errors") {
    CHECK_THROWS_AS(curate_correct_answer(make_pool(test::pointwise_item("a", std::nullopt), {1, 2}), {}),
                    ValidationError);
    CHECK_THROWS_AS(curate_correct_answer(make_pool(test::pointwise_item("a", 3), {}), {}), ValidationError);
  }

  TEST_CASE("pairwise margin is always 1") {
    const auto pool = make_pool(test::pairwise_item("p", 2), {2, 1, 1, 2});
    const auto pairs = curate_correct_answer(pool, uncapped(CurationMethod::correct_answer, 4));
    CHECK(indices(pairs) == std::vector<IndexPair>{{0, 1}, {0, 2}, {3, 1}, {3, 2}});
    for (const auto& p : pairs) CHECK(p.margin == 1);
  }

  TEST_CASE("majority") {
    const auto pool = make_pool(test::pointwise_item("a", std::nullopt), {4, 4, 3, 5, 4});
    const auto pairs = curate_majority(pool, uncapped(CurationMethod::majority, 1));
    CHECK(pairs.size() == 6);
    for (const auto& p : pairs) {
      CHECK(p.chosen.score == 4);
      CHECK(p.rejected.score != 4);
    }
    CHECK(curate_majority(make_pool(test::pointwise_item("b"), {2, 2, 2}), uncapped(CurationMethod::majority, 1)).empty());
    const auto tie = curate_majority(make_pool(test::pointwise_item("c"), {3, 3, 4, 4}), uncapped(CurationMethod::majority, 1));
    REQUIRE_FALSE(tie.empty());
    for (const auto& p : tie) CHECK(p.chosen.score == 3);
  }

  TEST_CASE("majority on an unparseable pool names the cause") {
    JudgmentPool pool{test::pointwise_item("a"), {}, 10};
    CHECK_THROWS_WITH_AS(curate_majority(pool, {}), doctest::Contains("unparseable"), ValidationError);
    CHECK_THROWS_AS(curate_majority(make_pool(test::pairwise_item("p"), {1, 2}), {}), ValidationError);
  }

  TEST_CASE("meta judge") {
    const auto pool = make_pool(test::pointwise_item("a"), {2, 4, 3});
    const MetaRatings ratings{{0, 5}, {1, 3}, {2, 3}};
    const auto pairs = curate_meta_judge(pool, ratings, uncapped(CurationMethod::meta_judge, 0));
    CHECK(indices(pairs) == std::vector<IndexPair>{{0, 1}, {0, 2}});
    CHECK(pairs[0].margin == 2);
    CHECK(curate_meta_judge(pool, {{0, 4}, {1, 4}, {2, 4}}, uncapped(CurationMethod::meta_judge, 0)).empty());
    CHECK_THROWS_AS(curate_meta_judge(pool, {{0, 4}, {1, 4}}, {}), ValidationError);
    CHECK(curate_meta_judge(pool, ratings, uncapped(CurationMethod::meta_judge, 3)).empty());
  }

  TEST_CASE("identical raw text is never paired") {
    auto pool = make_pool(test::pointwise_item("a", 5), {5, 1});
    pool.judgments[1].raw_text = pool.judgments[0].raw_text;
    CHECK(curate_correct_answer(pool, uncapped(CurationMethod::correct_answer, 1)).empty());
  }

  TEST_CASE("dedup keeps the first pair per score combination") {
    const auto pool = make_pool(test::pointwise_item("a", 5), {5, 3, 5, 3, 1});
    CurationConfig c = uncapped(CurationMethod::correct_answer, 1);
    c.dedup_identical_scores = true;
    CHECK(indices(curate_correct_answer(pool, c)) == std::vector<IndexPair>{{0, 1}, {0, 4}});
  }

  TEST_CASE("cap keeps a seeded subset in enumeration order") {
    const auto pool = make_pool(test::pointwise_item("a", 5), {5, 1, 5, 2, 5, 1, 3, 2});
    const auto all = indices(curate_correct_answer(pool, uncapped(CurationMethod::correct_answer, 1)));
    CurationConfig c = uncapped(CurationMethod::correct_answer, 1);
    c.max_pairs_per_item = 4;
    c.seed = 11;
    const auto capped = indices(curate_correct_answer(pool, c));
    CHECK(capped.size() == 4);
    CHECK(capped == indices(curate_correct_answer(pool, c)));
    std::size_t pos = 0;
    for (const auto& p : capped) {
      while (pos < all.size() && all[pos] != p) ++pos;
      CHECK(pos < all.size());
    }
    std::set<std::vector<IndexPair>> distinct;
    for (std::uint64_t s = 0; s < 20; ++s) {
      c.seed = s;
      distinct.insert(indices(curate_correct_answer(pool, c)));
    }
    CHECK(distinct.size() > 1);
  }

  TEST_CASE("brute-force oracle over random pools") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
      const bool pairwise = uniform_below(rng, 4) == 0;
      const int k = pairwise ? 2 : 5;
      const int size = 1 + static_cast<int>(uniform_below(rng, 6));
      const int truth = 1 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(k)));
      auto item = pairwise ? test::pairwise_item("p", truth) : test::pointwise_item("a", truth);
      std::vector<int> scores;
      for (int i = 0; i < size; ++i) scores.push_back(1 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(k))));
      auto pool = make_pool(item, scores);
      if (uniform_below(rng, 3) == 0) {
        // duplicate texts exercise the identical-text rule
        for (auto& j : pool.judgments) j.raw_text = "same words [RESULT] " + std::to_string(j.score);
      }
      const int margin = static_cast<int>(uniform_below(rng, 5));
      MetaRatings ratings;
      for (const auto& j : pool.judgments) ratings[j.sample_index] = 1 + static_cast<int>(uniform_below(rng, 5));

      for (auto method : {CurationMethod::correct_answer, CurationMethod::majority, CurationMethod::meta_judge}) {
        if (method != CurationMethod::correct_answer && pairwise) continue;
        int mode = 0;
        if (method == CurationMethod::majority) {
          std::map<int, int> counts;
          for (int s : scores) ++counts[s];
          int best = 0;
          for (auto [s, n] : counts) {
            if (n > best) {
              best = n;
              mode = s;
            }
          }
        }
        std::vector<IndexPair> expected;
        for (int c = 0; c < size; ++c) {
          for (int r = 0; r < size; ++r) {
            if (c == r) continue;
            const auto& jc = pool.judgments[static_cast<std::size_t>(c)];
            const auto& jr = pool.judgments[static_cast<std::size_t>(r)];
            if (jc.raw_text == jr.raw_text) continue;
            bool ok = false;
            if (method == CurationMethod::correct_answer) {
              ok = jc.score == truth && jr.score != truth && (pairwise || std::abs(jc.score - jr.score) >= margin);
            } else if (method == CurationMethod::majority) {
              ok = jc.score == mode && jr.score != mode && std::abs(jc.score - jr.score) >= margin;
            } else {
              const int d = ratings[c] - ratings[r];
              ok = d > 0 && d >= margin;
            }
            if (ok) expected.emplace_back(c, r);
          }
        }
        const auto got = curate(pool, uncapped(method, margin), &ratings);
        CHECK(indices(got) == expected);
        for (const auto& p : got) CHECK(p.chosen.sample_index != p.rejected.sample_index);
      }
    }
  }

  TEST_CASE("best of n") {
    const auto pool = make_pool(test::pointwise_item("a", 5), {5, 3, 5, 2});
    const auto records = select_best_of_n(pool);
    REQUIRE(records.size() == 2);
    CHECK(records[0].sample_index == 0);
    CHECK(records[1].sample_index == 2);
    CHECK(records[0].target == pool.judgments[0].raw_text);
    CHECK(records[0].prompt == render_pointwise(pool.item));
    CHECK(select_best_of_n(make_pool(test::pointwise_item("b", 1), {2, 3})).empty());
    CHECK_THROWS_AS(select_best_of_n(make_pool(test::pointwise_item("c", std::nullopt), {2})), ValidationError);
  }

  TEST_CASE("self-consistency") {
    CHECK(self_consistency_answer(make_pool(test::pointwise_item("a"), {4})) == 4);
    CHECK(self_consistency_answer(make_pool(test::pointwise_item("a"), {1, 5, 5, 1, 3})) == 1);
    CHECK(self_consistency_answer(make_pool(test::pointwise_item("a"), {2, 2, 4})) == 2);
    CHECK_THROWS_AS(self_consistency_answer(make_pool(test::pointwise_item("a"), {})), ValidationError);
  }

  TEST_CASE("pools and summary") {
    const std::vector<EvaluationItem> items{test::pointwise_item("b", 5), test::pointwise_item("a", 2),
                                            test::pointwise_item("c", std::nullopt)};
    std::vector<JudgmentRecord> js{test::judgment("a", 1, 2), test::judgment("a", 0, 4), test::judgment("b", 0, 5),
                                   test::judgment("b", 2, 1), test::judgment("c", 0, 3)};
    const std::vector<RejectedGeneration> rejects{{"b", 1, "garbage", "MissingMarker"}};
    const auto pools = build_pools(items, js, std::nullopt, rejects);
    REQUIRE(pools.size() == 3);
    CHECK(pools[1].judgments[0].sample_index == 0);
    CHECK(pools[0].dropped_count == 1);
    CurationSummary summary;
    const auto pairs = curate_pools(pools, uncapped(CurationMethod::correct_answer, 1), nullptr, &summary);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].item_id == "a");  // item-id order
    CHECK(pairs[1].item_id == "b");
    CHECK(summary.items == 3);
    CHECK(summary.items_skipped == 1);
    CHECK(summary.items_with_pairs == 2);
    CHECK(summary.judgments_used == 5);
    CHECK(summary.judgments_dropped == 1);
    CHECK(summary.drop_rate() == doctest::Approx(1.0 / 6.0));
    CHECK(summary.margin_histogram.at(2) == 1);
    CHECK(summary.margin_histogram.at(4) == 1);
    CHECK_THROWS_AS(build_pools(items, {test::judgment("zzz", 0, 1)}), ValidationError);
  }

  TEST_CASE("config json") {
    CurationConfig c;
    c.method = CurationMethod::meta_judge;
    c.max_pairs_per_item.reset();
    c.seed = 9;
    const auto back = curation_config_from_json(to_json(c));
    CHECK(back.method == c.method);
    CHECK_FALSE(back.max_pairs_per_item.has_value());
    CHECK(back.seed == 9);
    CHECK_THROWS_AS(curation_config_from_json(Json{{"min_margin", 5}}), ValidationError);
  }
}
