#include "sre/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sre/error.hpp"
#include "sre/hashing.hpp"
#include "sre/parser.hpp"
#include "sre/prompts.hpp"

namespace sre {

namespace {

[[noreturn]] void fail_field(std::string_view id, std::string_view field, std::string_view what) {
  std::string msg = "record";
  if (!id.empty()) msg += " '" + std::string(id) + "'";
  msg += ": field '" + std::string(field) + "': " + std::string(what);
  throw ValidationError(msg);
}

template <typename T>
T get_field(const Json& j, std::string_view id, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) fail_field(id, field, "missing");
  try {
    return it->get<T>();
  } catch (const Json::exception& e) {
    fail_field(id, field, e.what());
  }
}

template <typename T>
std::optional<T> get_optional(const Json& j, std::string_view id, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const Json::exception& e) {
    fail_field(id, field, e.what());
  }
}

Json collect_extra(const Json& j, std::initializer_list<std::string_view> known) {
  Json extra = Json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) extra[it.key()] = it.value();
  }
  return extra;
}

Json with_extra(Json out, const Json& extra) {
  for (auto it = extra.begin(); it != extra.end(); ++it) {
    if (!out.contains(it.key())) out[it.key()] = it.value();
  }
  return out;
}

template <typename Record>
std::size_t write_validated(const std::filesystem::path& path, const std::vector<Record>& records,
                            auto&& validate) {
  std::vector<Json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    validate(r);
    rows.push_back(to_json(r));
  }
  write_jsonl(path, rows);
  return rows.size();
}

}  // namespace

std::string_view to_string(TaskType t) { return t == TaskType::pointwise ? "pointwise" : "pairwise"; }

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(CurationMethod m) {
  switch (m) {
    case CurationMethod::correct_answer: return "correct_answer";
    case CurationMethod::majority: return "majority";
    case CurationMethod::meta_judge: return "meta_judge";
  }
  return "correct_answer";
}

TaskType parse_task_type(std::string_view s) {
  if (s == "pointwise") return TaskType::pointwise;
  if (s == "pairwise") return TaskType::pairwise;
  throw ValidationError("unknown task_type '" + std::string(s) + "'");
}

Role parse_role(std::string_view s) {
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  if (s == "system") return Role::system;
  throw ValidationError("unknown role '" + std::string(s) + "'");
}

CurationMethod parse_curation_method(std::string_view s) {
  if (s == "correct_answer") return CurationMethod::correct_answer;
  if (s == "majority") return CurationMethod::majority;
  if (s == "meta_judge") return CurationMethod::meta_judge;
  throw ValidationError("unknown curation method '" + std::string(s) + "'");
}

int score_count(TaskType t) { return t == TaskType::pointwise ? 5 : 2; }

void ScoringCriteria::validate() const {
  if (entries.size() != 5) {
    throw ValidationError("criteria must have exactly 5 entries, got " + std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].score != static_cast<int>(i) + 1) {
      throw ValidationError("criteria scores must be 1..5 in ascending order");
    }
  }
}

void EvaluationItem::validate() const {
  if (id.empty()) fail_field(id, "id", "empty");
  if (task_type == TaskType::pointwise) {
    if (!response) fail_field(id, "response", "required for pointwise items");
    if (response_1) fail_field(id, "response_1", "not allowed for pointwise items");
    if (response_2) fail_field(id, "response_2", "not allowed for pointwise items");
    if (ground_truth_preference) fail_field(id, "ground_truth_preference", "not allowed for pointwise items");
  } else {
    if (response) fail_field(id, "response", "not allowed for pairwise items");
    if (!response_1) fail_field(id, "response_1", "required for pairwise items");
    if (!response_2) fail_field(id, "response_2", "required for pairwise items");
    if (ground_truth_score) fail_field(id, "ground_truth_score", "not allowed for pairwise items");
  }
  if (ground_truth_score && (*ground_truth_score < 1 || *ground_truth_score > 5)) {
    fail_field(id, "ground_truth_score", "must be in 1..5");
  }
  if (ground_truth_preference && (*ground_truth_preference < 1 || *ground_truth_preference > 2)) {
    fail_field(id, "ground_truth_preference", "must be 1 or 2");
  }
  try {
    criteria.validate();
  } catch (const ValidationError& e) {
    fail_field(id, "criteria", e.what());
  }
}

bool EvaluationItem::has_ground_truth() const { return ground_truth().has_value(); }

std::optional<int> EvaluationItem::ground_truth() const {
  return task_type == TaskType::pointwise ? ground_truth_score : ground_truth_preference;
}

void JudgmentRecord::validate(TaskType task) const {
  if (item_id.empty()) fail_field(item_id, "item_id", "empty");
  if (sample_index < 0) fail_field(item_id, "sample_index", "negative");
  if (score < 1 || score > score_count(task)) fail_field(item_id, "score", "out of range for task type");
  const ParseResult parsed = task == TaskType::pointwise ? parse_pointwise(raw_text) : parse_pairwise(raw_text);
  if (!parsed) fail_field(item_id, "raw_text", "does not parse: " + std::string(to_string(parsed.error())));
  if (parsed->value != score || parsed->rationale != rationale) {
    fail_field(item_id, "raw_text", "does not reparse to (rationale, score)");
  }
}

void PreferencePairRecord::validate() const {
  chosen.validate();
  rejected.validate();
  if (chosen.item_id != item_id) fail_field(item_id, "chosen.item_id", "does not match item_id");
  if (rejected.item_id != item_id) fail_field(item_id, "rejected.item_id", "does not match item_id");
  if (chosen.raw_text == rejected.raw_text) fail_field(item_id, "rejected.raw_text", "identical to chosen");
  if (margin < 0) fail_field(item_id, "margin", "negative");
  if (iteration < 1) fail_field(item_id, "iteration", "must be >= 1");
}

Json to_json(const Message& m) { return Json{{"role", to_string(m.role)}, {"content", m.content}}; }

Json to_json(const ScoringCriteria& c) {
  Json arr = Json::array();
  for (const auto& e : c.entries) arr.push_back(Json{{"score", e.score}, {"description", e.description}});
  return arr;
}

Json to_json(const EvaluationItem& item) {
  Json j;
  j["id"] = item.id;
  j["task_type"] = to_string(item.task_type);
  j["conversation"] = Json::array();
  for (const auto& m : item.conversation) j["conversation"].push_back(to_json(m));
  if (item.response) j["response"] = to_json(*item.response);
  if (item.response_1) j["response_1"] = to_json(*item.response_1);
  if (item.response_2) j["response_2"] = to_json(*item.response_2);
  j["criteria"] = to_json(item.criteria);
  if (item.ground_truth_score) j["ground_truth_score"] = *item.ground_truth_score;
  if (item.ground_truth_preference) j["ground_truth_preference"] = *item.ground_truth_preference;
  if (item.category) j["category"] = *item.category;
  if (item.benchmark) j["benchmark"] = *item.benchmark;
  return with_extra(std::move(j), item.extra);
}

Json to_json(const JudgmentRecord& r) {
  Json j{{"item_id", r.item_id},   {"sample_index", r.sample_index}, {"rationale", r.rationale},
         {"score", r.score},       {"raw_text", r.raw_text},         {"backend", r.backend},
         {"temperature", r.temperature}};
  return with_extra(std::move(j), r.extra);
}

Json to_json(const PreferencePairRecord& p) {
  Json j{{"item_id", p.item_id},
         {"chosen", to_json(p.chosen)},
         {"rejected", to_json(p.rejected)},
         {"margin", p.margin},
         {"method", to_string(p.method)},
         {"iteration", p.iteration}};
  return with_extra(std::move(j), p.extra);
}

Json to_json(const RejectedGeneration& r) {
  return Json{{"item_id", r.item_id}, {"sample_index", r.sample_index}, {"raw_text", r.raw_text}, {"error", r.error}};
}

Message message_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("message must be an object");
  Message m;
  m.role = parse_role(get_field<std::string>(j, "", "role"));
  m.content = get_field<std::string>(j, "", "content");
  return m;
}

ScoringCriteria criteria_from_json(const Json& j) {
  if (!j.is_array()) throw ValidationError("criteria must be an array");
  ScoringCriteria c;
  for (const auto& e : j) {
    c.entries.push_back({get_field<int>(e, "", "score"), get_field<std::string>(e, "", "description")});
  }
  return c;
}

EvaluationItem item_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("item must be a JSON object");
  EvaluationItem item;
  item.id = get_field<std::string>(j, "", "id");
  const std::string& id = item.id;
  try {
    item.task_type = parse_task_type(get_field<std::string>(j, id, "task_type"));
  } catch (const ValidationError& e) {
    fail_field(id, "task_type", e.what());
  }
  auto read_message = [&](const char* field) -> std::optional<Message> {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) return std::nullopt;
    try {
      return message_from_json(*it);
    } catch (const ValidationError& e) {
      fail_field(id, field, e.what());
    }
  };
  if (auto it = j.find("conversation"); it != j.end()) {
    if (!it->is_array()) fail_field(id, "conversation", "must be an array");
    for (const auto& m : *it) {
      try {
        item.conversation.push_back(message_from_json(m));
      } catch (const ValidationError& e) {
        fail_field(id, "conversation", e.what());
      }
    }
  }
  item.response = read_message("response");
  item.response_1 = read_message("response_1");
  item.response_2 = read_message("response_2");
  if (auto it = j.find("criteria"); it != j.end()) {
    try {
      item.criteria = criteria_from_json(*it);
    } catch (const ValidationError& e) {
      fail_field(id, "criteria", e.what());
    }
  }
  item.ground_truth_score = get_optional<int>(j, id, "ground_truth_score");
  item.ground_truth_preference = get_optional<int>(j, id, "ground_truth_preference");
  item.category = get_optional<std::string>(j, id, "category");
  item.benchmark = get_optional<std::string>(j, id, "benchmark");
  item.extra = collect_extra(j, {"id", "task_type", "conversation", "response", "response_1", "response_2",
                                 "criteria", "ground_truth_score", "ground_truth_preference", "category",
                                 "benchmark"});
  return item;
}

JudgmentRecord judgment_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("judgment must be a JSON object");
  JudgmentRecord r;
  r.item_id = get_field<std::string>(j, "", "item_id");
  r.sample_index = get_field<int>(j, r.item_id, "sample_index");
  r.rationale = get_field<std::string>(j, r.item_id, "rationale");
  r.score = get_field<int>(j, r.item_id, "score");
  r.raw_text = get_field<std::string>(j, r.item_id, "raw_text");
  r.backend = get_optional<std::string>(j, r.item_id, "backend").value_or("");
  r.temperature = get_optional<double>(j, r.item_id, "temperature").value_or(0.0);
  r.extra = collect_extra(j, {"item_id", "sample_index", "rationale", "score", "raw_text", "backend", "temperature"});
  return r;
}

PreferencePairRecord pair_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("pair must be a JSON object");
  PreferencePairRecord p;
  p.item_id = get_field<std::string>(j, "", "item_id");
  auto sub = [&](const char* field) {
    auto it = j.find(field);
    if (it == j.end()) fail_field(p.item_id, field, "missing");
    try {
      return judgment_from_json(*it);
    } catch (const ValidationError& e) {
      fail_field(p.item_id, field, e.what());
    }
  };
  p.chosen = sub("chosen");
  p.rejected = sub("rejected");
  p.margin = get_field<int>(j, p.item_id, "margin");
  try {
    p.method = parse_curation_method(get_field<std::string>(j, p.item_id, "method"));
  } catch (const ValidationError& e) {
    fail_field(p.item_id, "method", e.what());
  }
  p.iteration = get_field<int>(j, p.item_id, "iteration");
  p.extra = collect_extra(j, {"item_id", "chosen", "rejected", "margin", "method", "iteration"});
  p.validate();
  return p;
}

RejectedGeneration rejected_from_json(const Json& j) {
  RejectedGeneration r;
  r.item_id = get_field<std::string>(j, "", "item_id");
  r.sample_index = get_field<int>(j, r.item_id, "sample_index");
  r.raw_text = get_field<std::string>(j, r.item_id, "raw_text");
  r.error = get_field<std::string>(j, r.item_id, "error");
  return r;
}

std::vector<JsonlRow> read_jsonl_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<JsonlRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      rows.push_back({line_no, Json::parse(line)});
    } catch (const Json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
  }
  if (in.bad()) throw IoError("read failed: " + path.string());
  return rows;
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::vector<Json> out;
  for (auto& row : read_jsonl_rows(path)) out.push_back(std::move(row.value));
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump(-1, ' ', false, Json::error_handler_t::strict);
    out += '\n';
  }
  write_text_file(path, out);
}

namespace {

template <typename T, typename Convert>
std::vector<T> load_with_lines(const std::filesystem::path& path, Convert&& convert) {
  auto rows = read_jsonl_rows(path);
  std::vector<T> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    try {
      out.push_back(convert(row.value));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(row.line) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<EvaluationItem> load_items(const std::filesystem::path& path, const LoadOptions& options) {
  std::set<std::string> seen;
  return load_with_lines<EvaluationItem>(path, [&](const Json& row) {
    EvaluationItem item = item_from_json(row);
    if (options.default_criteria_when_missing && !row.contains("criteria")) {
      item.criteria = default_reward_bench_criteria();
    }
    item.validate();
    if (!seen.insert(item.id).second) fail_field(item.id, "id", "duplicate id");
    return item;
  });
}

std::vector<JudgmentRecord> load_judgments(const std::filesystem::path& path) {
  return load_with_lines<JudgmentRecord>(path, [](const Json& row) { return judgment_from_json(row); });
}

std::vector<PreferencePairRecord> load_pairs(const std::filesystem::path& path) {
  return load_with_lines<PreferencePairRecord>(path, [](const Json& row) { return pair_from_json(row); });
}

std::vector<RejectedGeneration> load_rejects(const std::filesystem::path& path) {
  return load_with_lines<RejectedGeneration>(path, [](const Json& row) { return rejected_from_json(row); });
}

std::size_t write_records(const std::filesystem::path& path, const std::vector<EvaluationItem>& records) {
  std::set<std::string> seen;
  return write_validated(path, records, [&](const EvaluationItem& item) {
    item.validate();
    if (!seen.insert(item.id).second) fail_field(item.id, "id", "duplicate id");
  });
}

std::size_t write_records(const std::filesystem::path& path, const std::vector<JudgmentRecord>& records) {
  return write_validated(path, records, [](const JudgmentRecord& r) { r.validate(); });
}

std::size_t write_records(const std::filesystem::path& path, const std::vector<PreferencePairRecord>& records) {
  return write_validated(path, records, [](const PreferencePairRecord& p) { p.validate(); });
}

std::size_t write_records(const std::filesystem::path& path, const std::vector<RejectedGeneration>& records) {
  return write_validated(path, records, [](const RejectedGeneration&) {});
}

std::vector<EvaluationItem> sample_subset(const std::vector<EvaluationItem>& items, std::size_t count,
                                          std::uint64_t seed) {
  if (count > items.size()) {
    throw ValidationError("sample count " + std::to_string(count) + " exceeds " + std::to_string(items.size()) +
                          " items");
  }
  // Selection sampling (Knuth's Algorithm S): one pass, order preserved.
  Rng rng(mix64(seed));
  std::vector<EvaluationItem> out;
  out.reserve(count);
  std::size_t needed = count;
  for (std::size_t i = 0; i < items.size() && needed > 0; ++i) {
    const std::size_t remaining = items.size() - i;
    if (uniform_below(rng, remaining) < needed) {
      out.push_back(items[i]);
      --needed;
    }
  }
  return out;
}

std::size_t count_from_fraction(double fraction, std::size_t size) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValidationError("fraction must be in [0, 1]");
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(size)));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace sre
