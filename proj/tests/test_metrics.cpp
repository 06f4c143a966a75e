#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sre/hashing.hpp"
#include "sre/metrics.hpp"

using namespace sre;

namespace {

// Textbook two-pass formula.
double two_pass_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

AnnotationVote vote(const std::string& task, VoteChoice c, const std::string& left, const std::string& right,
                    const std::string& bench = "") {
  AnnotationVote v;
  v.task_id = task;
  v.annotator_id = "ann";
  v.choice = c;
  v.left_model = left;
  v.right_model = right;
  v.benchmark = bench;
  return v;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("pearson basics") {
    const std::vector<double> a{1, 2, 3}, b{3, 2, 1};
    CHECK(pearson(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pearson(a, b) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK_THROWS_AS(pearson(a, std::vector<double>{1, 2}), LengthMismatchError);
    CHECK_THROWS_AS(pearson(a, std::vector<double>{2, 2, 2}), ZeroVarianceError);
  }

  TEST_CASE("pearson against the two-pass formula") {
    Rng rng(17);
    for (int t = 0; t < 100; ++t) {
      const std::size_t n = 2 + uniform_below(rng, 200);
      std::vector<double> x(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = 10 * unit_uniform(rng);
        y[i] = 0.5 * x[i] + 5 * unit_uniform(rng);
      }
      CHECK(std::abs(pearson(x, y) - two_pass_pearson(x, y)) < 1e-12);
    }
  }

  TEST_CASE("pointwise report") {
    const std::vector<int> t{1, 2, 3, 4, 5};
    const auto perfect = pointwise_report(t, t);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.histogram.at(0) == 5);
    CHECK(*perfect.pearson_r == doctest::Approx(1.0));

    const auto off = pointwise_report(std::vector<int>{2, 3}, std::vector<int>{1, 2});
    CHECK(off.accuracy == 0.0);
    CHECK(off.histogram.at(1) == 2);
    CHECK(off.histogram.size() == 9);

    const auto constant = pointwise_report(std::vector<int>{3, 3, 3}, std::vector<int>{1, 2, 3});
    CHECK_FALSE(constant.pearson_r.has_value());
    CHECK_THROWS_AS(pointwise_report(std::vector<int>{1}, std::vector<int>{1, 2}), LengthMismatchError);
  }

  TEST_CASE("histogram conserves n") {
    Rng rng(3);
    for (int t = 0; t < 1000; ++t) {
      const std::size_t n = 1 + uniform_below(rng, 50);
      std::vector<int> p(n), g(n);
      std::map<int, std::size_t> direct;
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = 1 + static_cast<int>(uniform_below(rng, 5));
        g[i] = 1 + static_cast<int>(uniform_below(rng, 5));
        ++direct[p[i] - g[i]];
      }
      const auto r = pointwise_report(p, g);
      std::size_t total = 0;
      for (const auto& [d, c] : r.histogram) {
        total += c;
        CHECK(c == (direct.count(d) ? direct[d] : 0));
      }
      CHECK(total == n);
    }
  }

  TEST_CASE("pairwise report") {
    std::vector<EvaluationItem> items{test::pairwise_item("a1", 1, "A"), test::pairwise_item("a2", 2, "A"),
                                      test::pairwise_item("b1", 1, "B")};
    const auto all = pairwise_report(items, std::vector<int>{1, 2, 1});
    CHECK(all.per_category.at("A") == 1.0);
    CHECK(all.per_category.at("B") == 1.0);
    CHECK(all.total == 1.0);

    const std::vector<int> preds{1, 1, 1};
    const auto r = pairwise_report(items, preds);
    CHECK(r.per_category.at("A") == 0.5);
    CHECK(r.per_category.at("B") == 1.0);
    CHECK(r.total == 2.0 / 3.0);
    const auto eq = pairwise_report(items, preds, true);
    CHECK(eq.total == 0.75);

    std::vector<EvaluationItem> shuffled{items[2], items[0], items[1]};
    const auto s = pairwise_report(shuffled, std::vector<int>{1, 1, 1});
    CHECK(s.per_category == r.per_category);
    CHECK(s.total == r.total);
  }

  TEST_CASE("win rate") {
    std::vector<AnnotationVote> votes{vote("t1", VoteChoice::left, "sre", "sft"),
                                      vote("t2", VoteChoice::right, "sft", "sre"),
                                      vote("t3", VoteChoice::tie, "sre", "sft")};
    const auto w = win_rate(votes, "sre");
    CHECK(w.overall == doctest::Approx(2.5 / 3.0));
    CHECK(w.votes == 3);
    CHECK(win_rate(votes, "sft").overall == doctest::Approx(0.5 / 3.0));
    std::vector<AnnotationVote> ties{vote("t1", VoteChoice::tie, "x", "y"), vote("t2", VoteChoice::tie, "y", "x")};
    CHECK(win_rate(ties, "x").overall == 0.5);
    CHECK_THROWS_AS(win_rate({}, "x"), ValidationError);
    CHECK_THROWS_AS(win_rate(ties, "z"), ValidationError);

    std::vector<AnnotationVote> benches{vote("t1", VoteChoice::left, "x", "y", "flask"),
                                        vote("t2", VoteChoice::left, "y", "x", "hhh")};
    const auto wb = win_rate(benches, "x");
    CHECK(wb.per_benchmark.at("flask") == 1.0);
    CHECK(wb.per_benchmark.at("hhh") == 0.0);
    CHECK(wb.overall == 0.5);
  }

  TEST_CASE("headline win-rate fixture shape") {
    // 100 votes, 55 for SRE, none tied: the reported 0.55 shape.
    std::vector<AnnotationVote> votes;
    for (int i = 0; i < 100; ++i) {
      votes.push_back(vote("t" + std::to_string(i), i < 55 ? VoteChoice::left : VoteChoice::right, "sre", "sft"));
    }
    const auto j = to_json(win_rate(votes, "sre"));
    CHECK(j["overall"] == 0.55);
    CHECK(j.contains("per_benchmark"));
  }

  TEST_CASE("vote json") {
    auto v = vote("t1", VoteChoice::right, "x", "y", "b");
    v.reasons = {"clearer", "more specific"};
    CHECK(vote_from_json(to_json(v)) == v);
    auto bad = to_json(v);
    bad["choice"] = "middle";
    CHECK_THROWS_AS(vote_from_json(bad), ValidationError);
  }

  TEST_CASE("tables") {
    PointwiseReport r;
    r.n = 10;
    r.accuracy = 0.5;
    r.pearson_r = 0.25;
    const auto text = render_pointwise_table({{"Base", r}, {"Iter 1", r}});
    CHECK(text.find("Base") != std::string::npos);
    CHECK(text.find("0.500") != std::string::npos);
  }
}
