#include "sre/curation.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <unordered_map>

#include "sre/error.hpp"
#include "sre/hashing.hpp"

namespace sre {

namespace {

struct Candidate {
  std::size_t chosen;
  std::size_t rejected;
  int margin;
};

void require_nonempty(const JudgmentPool& pool, const char* what) {
  if (pool.judgments.empty()) {
    throw ValidationError(std::string(what) + ": empty judgment pool for item '" + pool.item.id + "'");
  }
}

std::vector<PreferencePairRecord> finalize(const JudgmentPool& pool, std::vector<Candidate> candidates,
                                           const CurationConfig& config) {
  const auto& js = pool.judgments;
  std::erase_if(candidates, [&](const Candidate& c) { return js[c.chosen].raw_text == js[c.rejected].raw_text; });

  if (config.dedup_identical_scores) {
    std::set<std::pair<int, int>> seen;
    std::erase_if(candidates, [&](const Candidate& c) {
      return !seen.insert({js[c.chosen].score, js[c.rejected].score}).second;
    });
  }

  if (config.max_pairs_per_item && candidates.size() > static_cast<std::size_t>(*config.max_pairs_per_item)) {
    // Seeded uniform choice of `cap` candidates, keeping enumeration order.
    const auto cap = static_cast<std::size_t>(*config.max_pairs_per_item);
    Rng rng(derive_seed(config.seed, pool.item.id, static_cast<std::uint64_t>(config.iteration)));
    std::vector<Candidate> kept;
    kept.reserve(cap);
    std::size_t needed = cap;
    for (std::size_t i = 0; i < candidates.size() && needed > 0; ++i) {
      if (uniform_below(rng, candidates.size() - i) < needed) {
        kept.push_back(candidates[i]);
        --needed;
      }
    }
    candidates = std::move(kept);
  }

  std::vector<PreferencePairRecord> pairs;
  pairs.reserve(candidates.size());
  for (const auto& c : candidates) {
    PreferencePairRecord p;
    p.item_id = pool.item.id;
    p.chosen = js[c.chosen];
    p.rejected = js[c.rejected];
    p.margin = c.margin;
    p.method = config.method;
    p.iteration = config.iteration;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace

void JudgmentPool::validate() const {
  for (std::size_t i = 0; i < judgments.size(); ++i) {
    if (judgments[i].item_id != item.id) {
      throw ValidationError("pool for '" + item.id + "' contains a judgment for '" + judgments[i].item_id + "'");
    }
    if (i > 0 && judgments[i].sample_index <= judgments[i - 1].sample_index) {
      throw ValidationError("pool for '" + item.id + "': sample_index must be strictly increasing");
    }
    if (judgments[i].score < 1 || judgments[i].score > score_count(item.task_type)) {
      throw ValidationError("pool for '" + item.id + "': judgment score out of range");
    }
  }
  if (dropped_count < 0) throw ValidationError("pool for '" + item.id + "': negative dropped_count");
}

void CurationConfig::validate() const {
  if (min_margin < 0 || min_margin > 4) throw ValidationError("min_margin must be in 0..4");
  if (max_pairs_per_item && *max_pairs_per_item < 0) throw ValidationError("max_pairs_per_item must be >= 0");
  if (iteration < 1) throw ValidationError("iteration must be >= 1");
}

Json to_json(const CurationConfig& c) {
  return Json{{"method", to_string(c.method)},
              {"min_margin", c.min_margin},
              {"max_pairs_per_item", c.max_pairs_per_item ? Json(*c.max_pairs_per_item) : Json("unlimited")},
              {"dedup_identical_scores", c.dedup_identical_scores},
              {"seed", c.seed}};
}

CurationConfig curation_config_from_json(const Json& j, const CurationConfig& defaults) {
  CurationConfig c = defaults;
  if (j.contains("method")) c.method = parse_curation_method(j.at("method").get<std::string>());
  c.min_margin = j.value("min_margin", c.min_margin);
  if (j.contains("max_pairs_per_item")) {
    const Json& cap = j.at("max_pairs_per_item");
    if (cap.is_null() || (cap.is_string() && cap.get<std::string>() == "unlimited")) {
      c.max_pairs_per_item.reset();
    } else {
      c.max_pairs_per_item = cap.get<int>();
    }
  }
  c.dedup_identical_scores = j.value("dedup_identical_scores", c.dedup_identical_scores);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::vector<PreferencePairRecord> curate_correct_answer(const JudgmentPool& pool, const CurationConfig& config) {
  config.validate();
  const auto truth = pool.item.ground_truth();
  if (!truth) throw ValidationError("curate_correct_answer: item '" + pool.item.id + "' has no ground truth");
  require_nonempty(pool, "curate_correct_answer");
  const bool pointwise = pool.item.task_type == TaskType::pointwise;
  const auto& js = pool.judgments;
  std::vector<Candidate> candidates;
  for (std::size_t c = 0; c < js.size(); ++c) {
    if (js[c].score != *truth) continue;
    for (std::size_t r = 0; r < js.size(); ++r) {
      if (js[r].score == *truth) continue;
      if (pointwise) {
        const int margin = std::abs(js[c].score - js[r].score);
        if (margin >= config.min_margin) candidates.push_back({c, r, margin});
      } else {
        candidates.push_back({c, r, 1});
      }
    }
  }
  return finalize(pool, std::move(candidates), config);
}

std::vector<PreferencePairRecord> curate_majority(const JudgmentPool& pool, const CurationConfig& config) {
  config.validate();
  if (pool.item.task_type != TaskType::pointwise) {
    throw ValidationError("curate_majority: item '" + pool.item.id + "' is not pointwise");
  }
  if (pool.judgments.empty()) {
    throw ValidationError(pool.dropped_count > 0
                              ? "curate_majority: every judgment for item '" + pool.item.id + "' was unparseable"
                              : "curate_majority: empty judgment pool for item '" + pool.item.id + "'");
  }
  const int mode = self_consistency_answer(pool);
  const auto& js = pool.judgments;
  std::vector<Candidate> candidates;
  for (std::size_t c = 0; c < js.size(); ++c) {
    if (js[c].score != mode) continue;
    for (std::size_t r = 0; r < js.size(); ++r) {
      if (js[r].score == mode) continue;
      const int margin = std::abs(js[c].score - js[r].score);
      if (margin >= config.min_margin) candidates.push_back({c, r, margin});
    }
  }
  return finalize(pool, std::move(candidates), config);
}

std::vector<PreferencePairRecord> curate_meta_judge(const JudgmentPool& pool, const MetaRatings& ratings,
                                                    const CurationConfig& config) {
  config.validate();
  require_nonempty(pool, "curate_meta_judge");
  const auto& js = pool.judgments;
  std::vector<int> rating(js.size());
  for (std::size_t i = 0; i < js.size(); ++i) {
    auto it = ratings.find(js[i].sample_index);
    if (it == ratings.end()) {
      throw ValidationError("curate_meta_judge: no rating for item '" + pool.item.id + "' sample " +
                            std::to_string(js[i].sample_index));
    }
    if (it->second < 1 || it->second > 5) throw ValidationError("curate_meta_judge: rating out of range");
    rating[i] = it->second;
  }
  std::vector<Candidate> candidates;
  for (std::size_t m = 0; m < js.size(); ++m) {
    for (std::size_t n = 0; n < js.size(); ++n) {
      const int diff = rating[m] - rating[n];
      if (diff > 0 && diff >= config.min_margin) candidates.push_back({m, n, diff});
    }
  }
  return finalize(pool, std::move(candidates), config);
}

std::vector<PreferencePairRecord> curate(const JudgmentPool& pool, const CurationConfig& config,
                                         const MetaRatings* ratings) {
  switch (config.method) {
    case CurationMethod::correct_answer: return curate_correct_answer(pool, config);
    case CurationMethod::majority: return curate_majority(pool, config);
    case CurationMethod::meta_judge:
      if (!ratings) throw ValidationError("meta_judge curation needs ratings");
      return curate_meta_judge(pool, *ratings, config);
  }
  return {};
}

Json to_json(const SftRecord& r) {
  return Json{{"item_id", r.item_id},
              {"sample_index", r.sample_index},
              {"prompt", to_json(r.prompt)},
              {"target", r.target},
              {"target_score", r.target_score}};
}

std::vector<SftRecord> select_best_of_n(const JudgmentPool& pool, const PromptTemplates& templates) {
  const auto truth = pool.item.ground_truth();
  if (!truth) throw ValidationError("select_best_of_n: item '" + pool.item.id + "' has no ground truth");
  std::vector<SftRecord> out;
  std::optional<PromptBundle> prompt;
  for (const auto& j : pool.judgments) {
    if (j.score != *truth) continue;
    if (!prompt) prompt = render_judge_prompt(pool.item, templates);
    out.push_back({pool.item.id, j.sample_index, *prompt, j.raw_text, j.score});
  }
  return out;
}

int score_mode(std::span<const int> scores) {
  if (scores.empty()) throw ValidationError("score_mode: no scores");
  std::map<int, int> counts;  // ascending, so the first maximum is the lowest tied score
  for (int s : scores) ++counts[s];
  int best = counts.begin()->first;
  int best_count = 0;
  for (const auto& [score, count] : counts) {
    if (count > best_count) {
      best = score;
      best_count = count;
    }
  }
  return best;
}

int self_consistency_answer(const JudgmentPool& pool) {
  if (pool.judgments.empty()) {
    throw ValidationError("self_consistency_answer: empty judgment pool for item '" + pool.item.id + "'");
  }
  std::vector<int> scores;
  scores.reserve(pool.judgments.size());
  for (const auto& j : pool.judgments) scores.push_back(j.score);
  return score_mode(scores);
}

std::vector<JudgmentPool> build_pools(const std::vector<EvaluationItem>& items,
                                      const std::vector<JudgmentRecord>& judgments,
                                      std::optional<int> expected_samples,
                                      const std::vector<RejectedGeneration>& rejects) {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<JudgmentPool> pools;
  pools.reserve(items.size());
  for (const auto& item : items) {
    index.emplace(item.id, pools.size());
    pools.push_back(JudgmentPool{item, {}, 0});
  }
  for (const auto& j : judgments) {
    auto it = index.find(j.item_id);
    if (it == index.end()) throw ValidationError("judgment references unknown item '" + j.item_id + "'");
    pools[it->second].judgments.push_back(j);
  }
  for (const auto& r : rejects) {
    auto it = index.find(r.item_id);
    if (it == index.end()) throw ValidationError("rejected generation references unknown item '" + r.item_id + "'");
    ++pools[it->second].dropped_count;
  }
  for (auto& pool : pools) {
    std::stable_sort(pool.judgments.begin(), pool.judgments.end(),
                     [](const JudgmentRecord& a, const JudgmentRecord& b) { return a.sample_index < b.sample_index; });
    if (expected_samples) {
      const int parsed = static_cast<int>(pool.judgments.size());
      if (rejects.empty()) pool.dropped_count = std::max(0, *expected_samples - parsed);
    }
    pool.validate();
  }
  return pools;
}

double CurationSummary::drop_rate() const {
  const std::size_t total = judgments_used + judgments_dropped;
  return total == 0 ? 0.0 : static_cast<double>(judgments_dropped) / static_cast<double>(total);
}

Json to_json(const CurationSummary& s) {
  Json hist = Json::object();
  for (const auto& [margin, count] : s.margin_histogram) hist[std::to_string(margin)] = count;
  return Json{{"method", s.method},
              {"items", s.items},
              {"items_with_pairs", s.items_with_pairs},
              {"items_skipped", s.items_skipped},
              {"pairs", s.pairs},
              {"judgments_used", s.judgments_used},
              {"judgments_dropped", s.judgments_dropped},
              {"drop_rate", s.drop_rate()},
              {"margin_histogram", hist}};
}

std::vector<PreferencePairRecord> curate_pools(const std::vector<JudgmentPool>& pools, const CurationConfig& config,
                                               const std::map<std::string, MetaRatings>* ratings,
                                               CurationSummary* summary) {
  config.validate();
  CurationSummary local;
  local.method = std::string(to_string(config.method));
  std::vector<PreferencePairRecord> all;
  std::vector<const JudgmentPool*> ordered;
  for (const auto& pool : pools) ordered.push_back(&pool);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const JudgmentPool* a, const JudgmentPool* b) { return a->item.id < b->item.id; });
  for (const JudgmentPool* pool_ptr : ordered) {
    const JudgmentPool& pool = *pool_ptr;
    ++local.items;
    local.judgments_used += pool.judgments.size();
    local.judgments_dropped += static_cast<std::size_t>(pool.dropped_count);
    const bool skip = pool.judgments.empty() ||
                      (config.method == CurationMethod::correct_answer && !pool.item.has_ground_truth()) ||
                      (config.method == CurationMethod::majority && pool.item.task_type != TaskType::pointwise);
    if (skip) {
      ++local.items_skipped;
      continue;
    }
    std::vector<PreferencePairRecord> pairs;
    if (config.method == CurationMethod::meta_judge) {
      if (!ratings) throw ValidationError("meta_judge curation needs ratings");
      auto it = ratings->find(pool.item.id);
      if (it == ratings->end()) throw ValidationError("no meta-judge ratings for item '" + pool.item.id + "'");
      pairs = curate_meta_judge(pool, it->second, config);
    } else {
      pairs = curate(pool, config);
    }
    if (!pairs.empty()) ++local.items_with_pairs;
    for (auto& p : pairs) {
      ++local.margin_histogram[p.margin];
      all.push_back(std::move(p));
    }
  }
  local.pairs = all.size();
  if (summary) *summary = std::move(local);
  return all;
}

}  // namespace sre
