#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sre/dataset.hpp"
#include "sre/error.hpp"

namespace sre {

class MetricError : public Error {
 public:
  using Error::Error;
};

class LengthMismatchError : public MetricError {
 public:
  using MetricError::MetricError;
};

class ZeroVarianceError : public MetricError {
 public:
  using MetricError::MetricError;
};

/// Sample Pearson correlation, single pass (Welford co-moments). Result clamped to [-1, 1].
double pearson(std::span<const double> xs, std::span<const double> ys);

struct PointwiseReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  std::optional<double> pearson_r;  // absent when either side is constant
  std::map<int, std::size_t> histogram;  // predicted - truth, keys -4..4
};

PointwiseReport pointwise_report(std::span<const int> preds, std::span<const int> truths);
Json to_json(const PointwiseReport& r);

struct PairwiseReport {
  std::map<std::string, double> per_category;
  std::map<std::string, std::size_t> counts;
  std::map<std::string, std::size_t> correct;
  double total = 0.0;
  bool equal_weight = false;
};

/// Per-category exact-match accuracy. `total` is weighted by category size unless equal_weight.
PairwiseReport pairwise_report(const std::vector<EvaluationItem>& items, std::span<const int> preds,
                               bool equal_weight = false);
Json to_json(const PairwiseReport& r);

enum class VoteChoice { left, right, tie };

std::string_view to_string(VoteChoice c);
VoteChoice parse_vote_choice(std::string_view s);

struct AnnotationVote {
  std::string task_id;
  std::string annotator_id;
  VoteChoice choice = VoteChoice::tie;
  std::vector<std::string> reasons;
  std::string left_model;   // server-side
  std::string right_model;  // server-side
  std::string timestamp;    // server-side
  std::string benchmark;    // server-side, copied from the task

  void validate() const;
  bool operator==(const AnnotationVote&) const = default;
};

Json to_json(const AnnotationVote& v);
AnnotationVote vote_from_json(const Json& j);

struct WinRate {
  std::map<std::string, double> per_benchmark;
  double overall = 0.0;
  std::size_t votes = 0;
};

/// (#votes for model + 0.5 * #ties) / #votes, per benchmark and overall.
WinRate win_rate(const std::vector<AnnotationVote>& votes, const std::string& model);
Json to_json(const WinRate& w);

/// Fixed-width text tables for side-by-side reading of several runs.
std::string render_pointwise_table(const std::vector<std::pair<std::string, PointwiseReport>>& rows);
std::string render_pairwise_table(const std::vector<std::pair<std::string, PairwiseReport>>& rows);

}  // namespace sre
