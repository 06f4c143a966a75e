#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "sre/dataset.hpp"
#include "sre/metrics.hpp"

namespace sre {

struct AnnotationCandidate {
  std::string model;  // server-side only
  std::string rationale;
  int score = 0;
};

/// One blind side-by-side comparison. candidates[0] belongs to model A, candidates[1] to model B.
struct AnnotationTask {
  std::string task_id;
  std::string item_id;
  std::string benchmark;
  ScoringCriteria criteria;
  std::vector<Message> conversation;
  std::optional<Message> response;
  std::optional<Message> response_1;
  std::optional<Message> response_2;
  std::vector<AnnotationCandidate> candidates;
  std::uint64_t layout_seed = 0;

  void validate() const;
};

Json to_json(const AnnotationTask& t);
AnnotationTask annotation_task_from_json(const Json& j);
std::vector<AnnotationTask> load_annotation_tasks(const std::filesystem::path& path);
void write_annotation_tasks(const std::filesystem::path& path, const std::vector<AnnotationTask>& tasks);

/// Tasks for items both models scored identically. Each model's judgment for an item is its
/// lowest sample_index. Throws ValidationError when the two judgment sets share no item.
std::vector<AnnotationTask> build_annotation_tasks(const std::vector<JudgmentRecord>& judgments_a,
                                                   const std::string& model_a,
                                                   const std::vector<JudgmentRecord>& judgments_b,
                                                   const std::string& model_b,
                                                   const std::vector<EvaluationItem>& items, std::uint64_t seed);

/// True when model A's rationale is shown on the left for this annotator.
bool model_a_on_left(const AnnotationTask& task, std::string_view annotator_id);

/// Task indices in the order this annotator sees them.
std::vector<std::size_t> annotator_task_order(const std::vector<AnnotationTask>& tasks, std::string_view annotator_id,
                                              std::uint64_t seed);

/// Append-only JSONL of AnnotationVote. Reopening a file restores its votes.
class VoteStore {
 public:
  explicit VoteStore(std::filesystem::path path);

  /// Appends unless (task_id, annotator_id) already voted. Returns false on a duplicate.
  bool append(const AnnotationVote& vote);
  bool has_vote(const std::string& task_id, const std::string& annotator_id) const;
  std::vector<AnnotationVote> votes() const;
  std::size_t completed_by(const std::string& annotator_id) const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::vector<AnnotationVote> votes_;
  std::set<std::pair<std::string, std::string>> seen_;
};

struct AnnotationResponse {
  int status = 200;
  Json body;
};

struct AnnotationServiceOptions {
  std::optional<std::set<std::string>> allowed_annotators;
  std::uint64_t order_seed = 0;
};

/// The annotation API without the transport, so it can be driven directly.
class AnnotationService {
 public:
  AnnotationService(std::vector<AnnotationTask> tasks, std::filesystem::path store_path,
                    AnnotationServiceOptions options = {});

  AnnotationResponse next_task(const std::string& annotator_id) const;
  AnnotationResponse submit_vote(const std::string& body);
  AnnotationResponse results() const;
  AnnotationResponse health() const;

  const std::vector<AnnotationTask>& tasks() const { return tasks_; }
  const VoteStore& store() const { return store_; }
  /// Internal id behind a neutral label ("A" or "B").
  const std::string& model_for_label(const std::string& label) const;

 private:
  std::optional<AnnotationResponse> check_annotator(const std::string& annotator_id) const;

  std::vector<AnnotationTask> tasks_;
  std::map<std::string, std::size_t> index_;
  VoteStore store_;
  AnnotationServiceOptions options_;
  std::string model_a_;
  std::string model_b_;
};

/// HTTP transport for AnnotationService. Endpoints: GET /api/tasks/next?annotator=ID,
/// POST /api/votes, GET /api/results, GET /api/health.
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationService& service, std::optional<std::filesystem::path> static_dir = {});
  ~AnnotationServer();

  /// Binds and serves on a background thread. Port 0 picks a free port; returns the bound port.
  int start(const std::string& host, int port);
  /// Blocks until the server stops.
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

}  // namespace sre
