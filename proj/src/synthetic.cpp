#include "sre/synthetic.hpp"

#include <algorithm>
#include <cstdio>

#include "sre/error.hpp"
#include "sre/hashing.hpp"
#include "sre/policy.hpp"

namespace sre {

namespace {

std::string filler_word(Rng& rng, int vocabulary) {
  return "word" + std::to_string(uniform_below(rng, static_cast<std::uint64_t>(vocabulary)));
}

EvaluationItem make_item(const ReferenceTaskConfig& c, const std::string& id, Rng& rng) {
  std::string prompt;
  for (int i = 0; i < c.prompt_length; ++i) {
    if (i) prompt += ' ';
    prompt += filler_word(rng, c.filler_vocabulary);
  }
  const int keyword_total = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(c.max_keywords) + 1));
  const int filler_total =
      c.response_filler_min +
      static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(c.response_filler_max - c.response_filler_min) + 1));
  std::vector<std::string> words;
  for (int i = 0; i < filler_total; ++i) words.push_back(filler_word(rng, c.filler_vocabulary));
  for (int i = 0; i < keyword_total; ++i) words.push_back(c.keywords[uniform_below(rng, c.keywords.size())]);
  for (std::size_t i = words.size(); i > 1; --i) std::swap(words[i - 1], words[uniform_below(rng, i)]);
  std::string response;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) response += ' ';
    response += words[i];
  }

  EvaluationItem item;
  item.id = id;
  item.task_type = TaskType::pointwise;
  item.conversation = {Message{Role::user, prompt}};
  item.response = Message{Role::assistant, response};
  item.criteria = keyword_count_criteria();
  item.ground_truth_score = std::min(5, 1 + keyword_total);
  item.category = "keyword-count";
  item.benchmark = "reference";
  return item;
}

std::string padded_id(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%05zu", prefix, i);
  return buf;
}

}  // namespace

Json to_json(const ReferenceTaskConfig& c) {
  return Json{{"train_count", c.train_count},
              {"heldout_count", c.heldout_count},
              {"seed", c.seed},
              {"keywords", c.keywords},
              {"filler_vocabulary", c.filler_vocabulary},
              {"max_keywords", c.max_keywords},
              {"response_filler_min", c.response_filler_min},
              {"response_filler_max", c.response_filler_max},
              {"prompt_length", c.prompt_length}};
}

ReferenceTaskConfig reference_task_config_from_json(const Json& j) {
  ReferenceTaskConfig c;
  c.train_count = j.value("train_count", c.train_count);
  c.heldout_count = j.value("heldout_count", c.heldout_count);
  c.seed = j.value("seed", c.seed);
  c.keywords = j.value("keywords", c.keywords);
  c.filler_vocabulary = j.value("filler_vocabulary", c.filler_vocabulary);
  c.max_keywords = j.value("max_keywords", c.max_keywords);
  c.response_filler_min = j.value("response_filler_min", c.response_filler_min);
  c.response_filler_max = j.value("response_filler_max", c.response_filler_max);
  c.prompt_length = j.value("prompt_length", c.prompt_length);
  if (c.keywords.empty() || c.filler_vocabulary < 1 || c.max_keywords < 0 ||
      c.response_filler_min < 0 || c.response_filler_max < c.response_filler_min || c.prompt_length < 0) {
    throw ValidationError("synthetic task config: invalid settings");
  }
  return c;
}

ReferenceTask make_reference_task(const ReferenceTaskConfig& config) {
  ReferenceTask task;
  Rng train_rng(derive_seed(config.seed, "train"));
  for (std::size_t i = 0; i < config.train_count; ++i) task.train.push_back(make_item(config, padded_id("train", i), train_rng));
  Rng heldout_rng(derive_seed(config.seed, "heldout"));
  for (std::size_t i = 0; i < config.heldout_count; ++i) {
    task.heldout.push_back(make_item(config, padded_id("heldout", i), heldout_rng));
  }
  return task;
}

ScoringCriteria keyword_count_criteria() {
  return ScoringCriteria{{
      {1, "The response contains none of the quality keywords."},
      {2, "The response contains exactly one quality keyword."},
      {3, "The response contains exactly two quality keywords."},
      {4, "The response contains exactly three quality keywords."},
      {5, "The response contains four or more quality keywords."},
  }};
}

int keyword_count_score(const EvaluationItem& item, const std::vector<std::string>& keywords) {
  if (!item.response) throw ValidationError("keyword_count_score: item has no response");
  int count = 0;
  for (const auto& token : tokenize(item.response->content)) {
    if (std::find(keywords.begin(), keywords.end(), token) != keywords.end()) ++count;
  }
  return std::min(5, 1 + count);
}

}  // namespace sre
