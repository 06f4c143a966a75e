#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sre/dataset.hpp"
#include "sre/prompts.hpp"

namespace sre {

/// Parsed judgments for one item, in sample order, plus how many generations failed to parse.
struct JudgmentPool {
  EvaluationItem item;
  std::vector<JudgmentRecord> judgments;
  int dropped_count = 0;

  void validate() const;
};

struct CurationConfig {
  CurationMethod method = CurationMethod::correct_answer;
  int min_margin = 1;  // pointwise only
  std::optional<int> max_pairs_per_item = 4;  // nullopt = unlimited
  bool dedup_identical_scores = false;
  std::uint64_t seed = 0;
  int iteration = 1;

  void validate() const;
};

Json to_json(const CurationConfig& c);
CurationConfig curation_config_from_json(const Json& j, const CurationConfig& defaults = {});

/// Sample index -> meta-judge rating (1..5).
using MetaRatings = std::map<int, int>;

std::vector<PreferencePairRecord> curate_correct_answer(const JudgmentPool& pool, const CurationConfig& config);
std::vector<PreferencePairRecord> curate_majority(const JudgmentPool& pool, const CurationConfig& config);
std::vector<PreferencePairRecord> curate_meta_judge(const JudgmentPool& pool, const MetaRatings& ratings,
                                                    const CurationConfig& config);

/// Dispatches on config.method. `ratings` is required for meta_judge.
std::vector<PreferencePairRecord> curate(const JudgmentPool& pool, const CurationConfig& config,
                                         const MetaRatings* ratings = nullptr);

struct SftRecord {
  std::string item_id;
  int sample_index = 0;
  PromptBundle prompt;
  std::string target;
  int target_score = 0;
};

Json to_json(const SftRecord& r);

/// Judgments whose score matches the ground truth, as SFT supervision (best-of-N).
std::vector<SftRecord> select_best_of_n(const JudgmentPool& pool,
                                        const PromptTemplates& templates = PromptTemplates::defaults());

/// Mode of the scores, ties broken toward the lower score.
int score_mode(std::span<const int> scores);
int self_consistency_answer(const JudgmentPool& pool);

/// Groups judgments into per-item pools following `items` order. Items with no judgments get an
/// empty pool. `expected_samples`, when given, sets dropped_count = expected - parsed.
std::vector<JudgmentPool> build_pools(const std::vector<EvaluationItem>& items,
                                      const std::vector<JudgmentRecord>& judgments,
                                      std::optional<int> expected_samples = std::nullopt,
                                      const std::vector<RejectedGeneration>& rejects = {});

struct CurationSummary {
  std::string method;
  std::size_t items = 0;
  std::size_t items_with_pairs = 0;
  std::size_t pairs = 0;
  std::size_t judgments_used = 0;
  std::size_t judgments_dropped = 0;
  std::size_t items_skipped = 0;  // e.g. missing ground truth
  std::map<int, std::size_t> margin_histogram;

  double drop_rate() const;
};

Json to_json(const CurationSummary& s);

/// Curates every pool, concatenating pairs in item-id order, and fills `summary`.
/// Pools whose curation preconditions fail (no ground truth, fewer than two judgments) are skipped
/// and counted rather than aborting the run.
std::vector<PreferencePairRecord> curate_pools(const std::vector<JudgmentPool>& pools, const CurationConfig& config,
                                               const std::map<std::string, MetaRatings>* ratings,
                                               CurationSummary* summary);

}  // namespace sre
