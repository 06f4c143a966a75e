#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "sre/dataset.hpp"
#include "sre/synthetic.hpp"

namespace sre::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sre-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path golden_dir() { return std::filesystem::path(SRE_TEST_DATA_DIR) / "golden"; }
inline std::filesystem::path source_dir() { return std::filesystem::path(SRE_SOURCE_DIR); }

inline ScoringCriteria simple_criteria() {
  ScoringCriteria c;
  for (int s = 1; s <= 5; ++s) c.entries.push_back({s, "level " + std::to_string(s)});
  return c;
}

inline EvaluationItem pointwise_item(const std::string& id, std::optional<int> truth = 3,
                                     const std::string& response = "a plain answer") {
  EvaluationItem item;
  item.id = id;
  item.task_type = TaskType::pointwise;
  item.conversation = {{Role::user, "question for " + id}};
  item.response = Message{Role::assistant, response};
  item.criteria = simple_criteria();
  item.ground_truth_score = truth;
  return item;
}

inline EvaluationItem pairwise_item(const std::string& id, std::optional<int> preferred = 1,
                                    const std::string& category = "chat") {
  EvaluationItem item;
  item.id = id;
  item.task_type = TaskType::pairwise;
  item.conversation = {{Role::user, "question for " + id}};
  item.response_1 = Message{Role::assistant, "first answer"};
  item.response_2 = Message{Role::assistant, "second answer"};
  item.criteria = simple_criteria();
  item.ground_truth_preference = preferred;
  item.category = category;
  return item;
}

inline JudgmentRecord judgment(const std::string& item_id, int index, int score, const std::string& why = "") {
  JudgmentRecord j;
  j.item_id = item_id;
  j.sample_index = index;
  j.rationale = why.empty() ? "rationale " + std::to_string(index) : why;
  j.score = score;
  j.raw_text = j.rationale + " [RESULT] " + std::to_string(score);
  j.backend = "test";
  j.temperature = 1.0;
  return j;
}

}  // namespace sre::test
