#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sre/dataset.hpp"

namespace sre {

/// Desk-scale judging task: the ground-truth score of a response is
/// min(5, 1 + number of quality-keyword occurrences in it).
struct ReferenceTaskConfig {
  std::size_t train_count = 2000;
  std::size_t heldout_count = 500;
  std::uint64_t seed = 20241;
  std::vector<std::string> keywords = {"accurate", "safe", "clear", "helpful", "thorough", "honest"};
  int filler_vocabulary = 150;
  int max_keywords = 5;  // keyword count drawn uniformly from 0..max_keywords
  int response_filler_min = 10;
  int response_filler_max = 12;
  int prompt_length = 8;
};

Json to_json(const ReferenceTaskConfig& c);
ReferenceTaskConfig reference_task_config_from_json(const Json& j);

struct ReferenceTask {
  std::vector<EvaluationItem> train;
  std::vector<EvaluationItem> heldout;
};

ReferenceTask make_reference_task(const ReferenceTaskConfig& config);

/// The rubric attached to every reference item.
ScoringCriteria keyword_count_criteria();

/// Ground truth recomputed from the response text.
int keyword_count_score(const EvaluationItem& item, const std::vector<std::string>& keywords);

}  // namespace sre
