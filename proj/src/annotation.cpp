#include "sre/annotation.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <numeric>

#include "sre/error.hpp"
#include "sre/hashing.hpp"

namespace sre {

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json error_body(const std::string& message, const Json& fields = Json::object()) {
  Json j{{"error", message}};
  if (!fields.empty()) j["fields"] = fields;
  return j;
}

/// The annotator-facing view of a task: no model ids, rationales placed per annotator.
Json blind_view(const AnnotationTask& t, std::string_view annotator_id) {
  const bool a_left = model_a_on_left(t, annotator_id);
  const auto& left = t.candidates[a_left ? 0 : 1];
  const auto& right = t.candidates[a_left ? 1 : 0];
  Json j{{"task_id", t.task_id},
         {"benchmark", t.benchmark},
         {"criteria", to_json(t.criteria)},
         {"conversation", Json::array()},
         {"rationale_left", left.rationale},
         {"rationale_right", right.rationale},
         {"score", left.score}};
  for (const auto& m : t.conversation) j["conversation"].push_back(to_json(m));
  if (t.response) j["response"] = to_json(*t.response);
  if (t.response_1) j["response_1"] = to_json(*t.response_1);
  if (t.response_2) j["response_2"] = to_json(*t.response_2);
  return j;
}

}  // namespace

void AnnotationTask::validate() const {
  if (task_id.empty()) throw ValidationError("annotation task: task_id is empty");
  if (candidates.size() != 2) throw ValidationError("annotation task " + task_id + ": need exactly 2 candidates");
  if (candidates[0].model == candidates[1].model) {
    throw ValidationError("annotation task " + task_id + ": candidates come from the same model");
  }
  if (candidates[0].score != candidates[1].score) {
    throw ValidationError("annotation task " + task_id + ": candidate scores differ");
  }
}

Json to_json(const AnnotationTask& t) {
  Json j{{"task_id", t.task_id},       {"item_id", t.item_id},
         {"benchmark", t.benchmark},   {"criteria", to_json(t.criteria)},
         {"conversation", Json::array()}, {"candidates", Json::array()},
         {"layout_seed", t.layout_seed}};
  for (const auto& m : t.conversation) j["conversation"].push_back(to_json(m));
  if (t.response) j["response"] = to_json(*t.response);
  if (t.response_1) j["response_1"] = to_json(*t.response_1);
  if (t.response_2) j["response_2"] = to_json(*t.response_2);
  for (const auto& c : t.candidates) {
    j["candidates"].push_back(Json{{"model", c.model}, {"rationale", c.rationale}, {"score", c.score}});
  }
  return j;
}

AnnotationTask annotation_task_from_json(const Json& j) {
  AnnotationTask t;
  try {
    t.task_id = j.at("task_id").get<std::string>();
    t.item_id = j.value("item_id", std::string());
    t.benchmark = j.value("benchmark", std::string());
    t.criteria = criteria_from_json(j.at("criteria"));
    for (const auto& m : j.at("conversation")) t.conversation.push_back(message_from_json(m));
    if (j.contains("response")) t.response = message_from_json(j.at("response"));
    if (j.contains("response_1")) t.response_1 = message_from_json(j.at("response_1"));
    if (j.contains("response_2")) t.response_2 = message_from_json(j.at("response_2"));
    for (const auto& c : j.at("candidates")) {
      t.candidates.push_back(
          {c.at("model").get<std::string>(), c.at("rationale").get<std::string>(), c.value("score", 0)});
    }
    t.layout_seed = j.value("layout_seed", std::uint64_t{0});
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("annotation task: ") + e.what());
  }
  t.validate();
  return t;
}

std::vector<AnnotationTask> load_annotation_tasks(const std::filesystem::path& path) {
  std::vector<AnnotationTask> tasks;
  std::set<std::string> ids;
  for (const auto& row : read_jsonl_rows(path)) {
    try {
      tasks.push_back(annotation_task_from_json(row.value));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(row.line) + ": " + e.what());
    }
    if (!ids.insert(tasks.back().task_id).second) {
      throw ValidationError(path.string() + ":" + std::to_string(row.line) + ": duplicate task_id " +
                            tasks.back().task_id);
    }
  }
  return tasks;
}

void write_annotation_tasks(const std::filesystem::path& path, const std::vector<AnnotationTask>& tasks) {
  std::vector<Json> rows;
  for (const auto& t : tasks) {
    t.validate();
    rows.push_back(to_json(t));
  }
  write_jsonl(path, rows);
}

std::vector<AnnotationTask> build_annotation_tasks(const std::vector<JudgmentRecord>& judgments_a,
                                                   const std::string& model_a,
                                                   const std::vector<JudgmentRecord>& judgments_b,
                                                   const std::string& model_b,
                                                   const std::vector<EvaluationItem>& items, std::uint64_t seed) {
  if (model_a == model_b) throw ValidationError("build_annotation_tasks: model ids must differ");
  auto first_per_item = [](const std::vector<JudgmentRecord>& js) {
    std::map<std::string, const JudgmentRecord*> out;
    for (const auto& j : js) {
      auto [it, inserted] = out.emplace(j.item_id, &j);
      if (!inserted && j.sample_index < it->second->sample_index) it->second = &j;
    }
    return out;
  };
  const auto a = first_per_item(judgments_a);
  const auto b = first_per_item(judgments_b);

  std::vector<AnnotationTask> tasks;
  bool overlap = false;
  for (const auto& item : items) {
    const auto ia = a.find(item.id);
    const auto ib = b.find(item.id);
    if (ia == a.end() || ib == b.end()) continue;
    overlap = true;
    if (ia->second->score != ib->second->score) continue;
    AnnotationTask t;
    char buf[32];
    std::snprintf(buf, sizeof buf, "task-%05zu", tasks.size());
    t.task_id = buf;
    t.item_id = item.id;
    t.benchmark = item.benchmark.value_or("");
    t.criteria = item.criteria;
    t.conversation = item.conversation;
    t.response = item.response;
    t.response_1 = item.response_1;
    t.response_2 = item.response_2;
    t.candidates = {{model_a, ia->second->rationale, ia->second->score},
                    {model_b, ib->second->rationale, ib->second->score}};
    t.layout_seed = derive_seed(seed, item.id);
    tasks.push_back(std::move(t));
  }
  if (!overlap) throw ValidationError("build_annotation_tasks: the judgment sets share no item");
  return tasks;
}

bool model_a_on_left(const AnnotationTask& task, std::string_view annotator_id) {
  return (derive_seed(task.layout_seed, annotator_id) >> 63) == 0;
}

std::vector<std::size_t> annotator_task_order(const std::vector<AnnotationTask>& tasks, std::string_view annotator_id,
                                              std::uint64_t seed) {
  std::vector<std::size_t> order(tasks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, annotator_id));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[uniform_below(rng, i)]);
  }
  return order;
}

VoteStore::VoteStore(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  for (const auto& row : read_jsonl_rows(path_)) {
    AnnotationVote v;
    try {
      v = vote_from_json(row.value);
    } catch (const ValidationError& e) {
      throw ValidationError(path_.string() + ":" + std::to_string(row.line) + ": " + e.what());
    }
    if (!seen_.emplace(v.task_id, v.annotator_id).second) {
      throw ValidationError(path_.string() + ":" + std::to_string(row.line) + ": duplicate vote for task " +
                            v.task_id + " by " + v.annotator_id);
    }
    votes_.push_back(std::move(v));
  }
}

bool VoteStore::append(const AnnotationVote& vote) {
  vote.validate();
  std::lock_guard lock(mutex_);
  if (seen_.count({vote.task_id, vote.annotator_id})) return false;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out << to_json(vote).dump() << '\n';
  out.flush();
  if (!out) throw IoError("cannot append to vote store " + path_.string());
  seen_.emplace(vote.task_id, vote.annotator_id);
  votes_.push_back(vote);
  return true;
}

bool VoteStore::has_vote(const std::string& task_id, const std::string& annotator_id) const {
  std::lock_guard lock(mutex_);
  return seen_.count({task_id, annotator_id}) > 0;
}

std::vector<AnnotationVote> VoteStore::votes() const {
  std::lock_guard lock(mutex_);
  return votes_;
}

std::size_t VoteStore::completed_by(const std::string& annotator_id) const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& v : votes_) n += v.annotator_id == annotator_id;
  return n;
}

AnnotationService::AnnotationService(std::vector<AnnotationTask> tasks, std::filesystem::path store_path,
                                     AnnotationServiceOptions options)
    : tasks_(std::move(tasks)), store_(std::move(store_path)), options_(std::move(options)) {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    tasks_[i].validate();
    if (!index_.emplace(tasks_[i].task_id, i).second) {
      throw ValidationError("annotation service: duplicate task_id " + tasks_[i].task_id);
    }
    const auto& a = tasks_[i].candidates[0].model;
    const auto& b = tasks_[i].candidates[1].model;
    if (i == 0) {
      model_a_ = a;
      model_b_ = b;
    } else if (a != model_a_ || b != model_b_) {
      throw ValidationError("annotation service: tasks compare different model pairs");
    }
  }
}

const std::string& AnnotationService::model_for_label(const std::string& label) const {
  if (label == "A") return model_a_;
  if (label == "B") return model_b_;
  throw ValidationError("unknown label '" + label + "'");
}

std::optional<AnnotationResponse> AnnotationService::check_annotator(const std::string& annotator_id) const {
  if (annotator_id.empty()) {
    return AnnotationResponse{400, error_body("invalid request", {{"annotator_id", "required"}})};
  }
  if (options_.allowed_annotators && !options_.allowed_annotators->count(annotator_id)) {
    return AnnotationResponse{403, error_body("unknown annotator", {{"annotator_id", "not on the allow-list"}})};
  }
  return std::nullopt;
}

AnnotationResponse AnnotationService::next_task(const std::string& annotator_id) const {
  if (auto bad = check_annotator(annotator_id)) return *bad;
  const std::size_t completed = store_.completed_by(annotator_id);
  Json progress{{"completed", completed}, {"total", tasks_.size()}};
  for (std::size_t i : annotator_task_order(tasks_, annotator_id, options_.order_seed)) {
    if (!store_.has_vote(tasks_[i].task_id, annotator_id)) {
      return {200, Json{{"done", false}, {"task", blind_view(tasks_[i], annotator_id)}, {"progress", progress}}};
    }
  }
  return {200, Json{{"done", true}, {"task", nullptr}, {"progress", progress}}};
}

AnnotationResponse AnnotationService::submit_vote(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::parse_error&) {
    return {400, error_body("malformed vote", {{"body", "not valid JSON"}})};
  }
  if (!j.is_object()) return {400, error_body("malformed vote", {{"body", "must be a JSON object"}})};

  Json fields = Json::object();
  for (const auto& [key, value] : j.items()) {
    if (key != "task_id" && key != "annotator_id" && key != "choice" && key != "reasons") {
      fields[key] = "unknown field";
    }
  }
  auto need_string = [&](const char* key) {
    if (!j.contains(key)) {
      fields[key] = "required";
    } else if (!j[key].is_string() || j[key].get<std::string>().empty()) {
      fields[key] = "must be a non-empty string";
    }
  };
  need_string("task_id");
  need_string("annotator_id");
  need_string("choice");
  if (!fields.contains("choice")) {
    const auto c = j["choice"].get<std::string>();
    if (c != "left" && c != "right" && c != "tie") fields["choice"] = "must be one of left, right, tie";
  }
  if (j.contains("reasons")) {
    bool ok = j["reasons"].is_array();
    if (ok) {
      for (const auto& r : j["reasons"]) ok = ok && r.is_string();
    }
    if (!ok) fields["reasons"] = "must be a list of strings";
  }
  if (!fields.contains("task_id") && !index_.count(j["task_id"].get<std::string>())) {
    fields["task_id"] = "unknown task";
  }
  if (!fields.empty()) return {400, error_body("malformed vote", fields)};

  const std::string annotator = j["annotator_id"].get<std::string>();
  if (auto bad = check_annotator(annotator)) return *bad;

  const AnnotationTask& task = tasks_[index_.at(j["task_id"].get<std::string>())];
  AnnotationVote v;
  v.task_id = task.task_id;
  v.annotator_id = annotator;
  v.choice = parse_vote_choice(j["choice"].get<std::string>());
  v.reasons = j.value("reasons", std::vector<std::string>{});
  const bool a_left = model_a_on_left(task, annotator);
  v.left_model = task.candidates[a_left ? 0 : 1].model;
  v.right_model = task.candidates[a_left ? 1 : 0].model;
  v.timestamp = utc_timestamp();
  v.benchmark = task.benchmark;
  if (!store_.append(v)) {
    return {409, error_body("duplicate vote", {{"task_id", "already voted on by this annotator"}})};
  }
  return {201, Json{{"accepted", true}, {"task_id", v.task_id}}};
}

AnnotationResponse AnnotationService::results() const {
  const auto votes = store_.votes();
  Json j{{"votes", votes.size()}, {"tasks", tasks_.size()}, {"win_rates", Json::object()}};
  std::map<std::string, std::size_t> per_annotator;
  for (const auto& v : votes) ++per_annotator[v.annotator_id];
  j["annotators"] = per_annotator;
  if (!votes.empty()) {
    j["win_rates"]["A"] = to_json(win_rate(votes, model_a_));
    j["win_rates"]["B"] = to_json(win_rate(votes, model_b_));
  }
  return {200, j};
}

AnnotationResponse AnnotationService::health() const {
  return {200, Json{{"status", "ok"}, {"tasks", tasks_.size()}, {"votes", store_.votes().size()}}};
}

}  // namespace sre
