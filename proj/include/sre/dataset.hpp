#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sre {

using Json = nlohmann::json;

enum class TaskType { pointwise, pairwise };
enum class Role { system, user, assistant };
enum class CurationMethod { correct_answer, majority, meta_judge };

std::string_view to_string(TaskType t);
std::string_view to_string(Role r);
std::string_view to_string(CurationMethod m);
TaskType parse_task_type(std::string_view s);
Role parse_role(std::string_view s);
CurationMethod parse_curation_method(std::string_view s);

/// Number of score classes: 5 (Likert) for pointwise, 2 (choice) for pairwise.
int score_count(TaskType t);

struct Message {
  Role role = Role::user;
  std::string content;

  bool operator==(const Message&) const = default;
};

struct CriterionEntry {
  int score = 0;
  std::string description;

  bool operator==(const CriterionEntry&) const = default;
};

/// Five Likert descriptions, scores 1..5 each exactly once, ascending.
struct ScoringCriteria {
  std::vector<CriterionEntry> entries;

  void validate() const;
  bool operator==(const ScoringCriteria&) const = default;
};

struct EvaluationItem {
  std::string id;
  TaskType task_type = TaskType::pointwise;
  std::vector<Message> conversation;
  std::optional<Message> response;    // pointwise only
  std::optional<Message> response_1;  // pairwise only
  std::optional<Message> response_2;  // pairwise only
  ScoringCriteria criteria;
  std::optional<int> ground_truth_score;
  std::optional<int> ground_truth_preference;
  std::optional<std::string> category;
  std::optional<std::string> benchmark;
  Json extra = Json::object();  // unknown input fields, preserved on round trip

  void validate() const;
  bool has_ground_truth() const;
  /// Ground-truth label in the item's score space (Likert score or preferred index).
  std::optional<int> ground_truth() const;
  bool operator==(const EvaluationItem&) const = default;
};

struct JudgmentRecord {
  std::string item_id;
  int sample_index = 0;
  std::string rationale;
  int score = 0;
  std::string raw_text;
  std::string backend;
  double temperature = 0.0;
  Json extra = Json::object();

  /// Checks the score range for the given task and that raw_text reparses to (rationale, score).
  /// The pointwise range 1..5 is the default since it covers both tasks.
  void validate(TaskType task = TaskType::pointwise) const;
  bool operator==(const JudgmentRecord&) const = default;
};

struct PreferencePairRecord {
  std::string item_id;
  JudgmentRecord chosen;
  JudgmentRecord rejected;
  int margin = 0;
  CurationMethod method = CurationMethod::correct_answer;
  int iteration = 1;
  Json extra = Json::object();

  void validate() const;
  bool operator==(const PreferencePairRecord&) const = default;
};

/// A generation that failed to parse. Kept so drop rates can be reported.
struct RejectedGeneration {
  std::string item_id;
  int sample_index = 0;
  std::string raw_text;
  std::string error;

  bool operator==(const RejectedGeneration&) const = default;
};

Json to_json(const Message& m);
Json to_json(const ScoringCriteria& c);
Json to_json(const EvaluationItem& item);
Json to_json(const JudgmentRecord& j);
Json to_json(const PreferencePairRecord& p);
Json to_json(const RejectedGeneration& r);

Message message_from_json(const Json& j);
ScoringCriteria criteria_from_json(const Json& j);
EvaluationItem item_from_json(const Json& j);
JudgmentRecord judgment_from_json(const Json& j);
PreferencePairRecord pair_from_json(const Json& j);
RejectedGeneration rejected_from_json(const Json& j);

struct LoadOptions {
  /// Items without a "criteria" field get the Reward Bench default rubric.
  bool default_criteria_when_missing = false;
};

std::vector<EvaluationItem> load_items(const std::filesystem::path& path, const LoadOptions& options = {});
std::vector<JudgmentRecord> load_judgments(const std::filesystem::path& path);
std::vector<PreferencePairRecord> load_pairs(const std::filesystem::path& path);
std::vector<RejectedGeneration> load_rejects(const std::filesystem::path& path);

struct JsonlRow {
  std::size_t line = 0;  // 1-based
  Json value;
};

/// Reads a JSONL file line by line; blank lines are skipped. Parse errors name the line.
std::vector<JsonlRow> read_jsonl_rows(const std::filesystem::path& path);
std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);

std::size_t write_records(const std::filesystem::path& path, const std::vector<EvaluationItem>& records);
std::size_t write_records(const std::filesystem::path& path, const std::vector<JudgmentRecord>& records);
std::size_t write_records(const std::filesystem::path& path, const std::vector<PreferencePairRecord>& records);
std::size_t write_records(const std::filesystem::path& path, const std::vector<RejectedGeneration>& records);

/// Uniform sample without replacement that keeps the input's relative order.
/// A pure function of (input order, count, seed).
std::vector<EvaluationItem> sample_subset(const std::vector<EvaluationItem>& items, std::size_t count,
                                          std::uint64_t seed);

/// floor(fraction * size), the conversion used when a fraction is configured instead of a count.
std::size_t count_from_fraction(double fraction, std::size_t size);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace sre
