#include "sre/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "sre/error.hpp"

namespace sre {

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw LengthMismatchError("pearson: lengths differ (" + std::to_string(xs.size()) + " vs " +
                              std::to_string(ys.size()) + ")");
  }
  if (xs.size() < 2) throw LengthMismatchError("pearson: need at least 2 points");
  double mean_x = 0.0, mean_y = 0.0, m2x = 0.0, m2y = 0.0, cxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = xs[i] - mean_x;
    const double dy = ys[i] - mean_y;
    mean_x += dx / n;
    mean_y += dy / n;
    m2x += dx * (xs[i] - mean_x);
    m2y += dy * (ys[i] - mean_y);
    cxy += dx * (ys[i] - mean_y);
  }
  if (m2x <= 0.0 || m2y <= 0.0) throw ZeroVarianceError("pearson: zero variance");
  return std::clamp(cxy / std::sqrt(m2x * m2y), -1.0, 1.0);
}

PointwiseReport pointwise_report(std::span<const int> preds, std::span<const int> truths) {
  if (preds.size() != truths.size()) throw LengthMismatchError("pointwise_report: lengths differ");
  if (preds.empty()) throw LengthMismatchError("pointwise_report: no predictions");
  PointwiseReport r;
  r.n = preds.size();
  for (int d = -4; d <= 4; ++d) r.histogram[d] = 0;
  std::vector<double> px, tx;
  px.reserve(r.n);
  tx.reserve(r.n);
  for (std::size_t i = 0; i < r.n; ++i) {
    if (preds[i] < 1 || preds[i] > 5 || truths[i] < 1 || truths[i] > 5) {
      throw ValidationError("pointwise_report: score outside 1..5 at index " + std::to_string(i));
    }
    ++r.histogram[preds[i] - truths[i]];
    px.push_back(preds[i]);
    tx.push_back(truths[i]);
  }
  r.accuracy = static_cast<double>(r.histogram[0]) / static_cast<double>(r.n);
  if (r.n >= 2) {
    try {
      r.pearson_r = pearson(px, tx);
    } catch (const ZeroVarianceError&) {
      r.pearson_r.reset();
    }
  }
  return r;
}

Json to_json(const PointwiseReport& r) {
  Json hist = Json::object();
  for (const auto& [d, c] : r.histogram) hist[std::to_string(d)] = c;
  return Json{{"n", r.n},
              {"accuracy", r.accuracy},
              {"pearson_r", r.pearson_r ? Json(*r.pearson_r) : Json(nullptr)},
              {"histogram", hist}};
}

PairwiseReport pairwise_report(const std::vector<EvaluationItem>& items, std::span<const int> preds,
                               bool equal_weight) {
  if (items.size() != preds.size()) throw LengthMismatchError("pairwise_report: lengths differ");
  PairwiseReport r;
  r.equal_weight = equal_weight;
  std::size_t total_correct = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (!item.category) throw ValidationError("pairwise_report: item '" + item.id + "' has no category");
    if (!item.ground_truth_preference) {
      throw ValidationError("pairwise_report: item '" + item.id + "' has no ground_truth_preference");
    }
    ++r.counts[*item.category];
    r.correct[*item.category];  // present even when zero
    if (preds[i] == *item.ground_truth_preference) {
      ++r.correct[*item.category];
      ++total_correct;
    }
  }
  for (const auto& [cat, n] : r.counts) {
    r.per_category[cat] = static_cast<double>(r.correct[cat]) / static_cast<double>(n);
  }
  if (items.empty()) return r;
  if (equal_weight) {
    double sum = 0.0;
    for (const auto& [cat, acc] : r.per_category) sum += acc;
    r.total = sum / static_cast<double>(r.per_category.size());
  } else {
    r.total = static_cast<double>(total_correct) / static_cast<double>(items.size());
  }
  return r;
}

Json to_json(const PairwiseReport& r) {
  Json cats = Json::object();
  for (const auto& [cat, acc] : r.per_category) {
    cats[cat] = Json{{"accuracy", acc}, {"count", r.counts.at(cat)}, {"correct", r.correct.at(cat)}};
  }
  return Json{{"per_category", cats}, {"total", r.total}, {"equal_weight", r.equal_weight}};
}

std::string_view to_string(VoteChoice c) {
  switch (c) {
    case VoteChoice::left: return "left";
    case VoteChoice::right: return "right";
    case VoteChoice::tie: return "tie";
  }
  return "tie";
}

VoteChoice parse_vote_choice(std::string_view s) {
  if (s == "left") return VoteChoice::left;
  if (s == "right") return VoteChoice::right;
  if (s == "tie") return VoteChoice::tie;
  throw ValidationError("choice must be one of left, right, tie");
}

void AnnotationVote::validate() const {
  if (task_id.empty()) throw ValidationError("vote: task_id is empty");
  if (annotator_id.empty()) throw ValidationError("vote: annotator_id is empty");
  if (left_model == right_model) throw ValidationError("vote: left_model and right_model must differ");
}

Json to_json(const AnnotationVote& v) {
  return Json{{"task_id", v.task_id},         {"annotator_id", v.annotator_id}, {"choice", to_string(v.choice)},
              {"reasons", v.reasons},         {"left_model", v.left_model},     {"right_model", v.right_model},
              {"timestamp", v.timestamp},     {"benchmark", v.benchmark}};
}

AnnotationVote vote_from_json(const Json& j) {
  AnnotationVote v;
  try {
    v.task_id = j.at("task_id").get<std::string>();
    v.annotator_id = j.at("annotator_id").get<std::string>();
    v.choice = parse_vote_choice(j.at("choice").get<std::string>());
    v.reasons = j.value("reasons", std::vector<std::string>{});
    v.left_model = j.at("left_model").get<std::string>();
    v.right_model = j.at("right_model").get<std::string>();
    v.timestamp = j.value("timestamp", std::string());
    v.benchmark = j.value("benchmark", std::string());
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("vote: ") + e.what());
  }
  v.validate();
  return v;
}

WinRate win_rate(const std::vector<AnnotationVote>& votes, const std::string& model) {
  if (votes.empty()) throw ValidationError("win_rate: no votes");
  std::map<std::string, std::pair<double, std::size_t>> per;  // benchmark -> (points, votes)
  double points = 0.0;
  for (const auto& v : votes) {
    if (v.left_model != model && v.right_model != model) {
      throw ValidationError("win_rate: vote on task '" + v.task_id + "' does not involve model '" + model + "'");
    }
    double p = 0.0;
    if (v.choice == VoteChoice::tie) {
      p = 0.5;
    } else if ((v.choice == VoteChoice::left) == (v.left_model == model)) {
      p = 1.0;
    }
    points += p;
    auto& slot = per[v.benchmark.empty() ? "all" : v.benchmark];
    slot.first += p;
    ++slot.second;
  }
  WinRate w;
  w.votes = votes.size();
  w.overall = points / static_cast<double>(votes.size());
  for (const auto& [bench, acc] : per) w.per_benchmark[bench] = acc.first / static_cast<double>(acc.second);
  return w;
}

Json to_json(const WinRate& w) {
  return Json{{"overall", w.overall}, {"per_benchmark", w.per_benchmark}, {"votes", w.votes}};
}

namespace {

std::string fixed(double v, int precision = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string render(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) widths[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += " | ";
      out += pad(cells[c], widths[c]);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  std::string rule;
  for (std::size_t c = 0; c < widths.size(); ++c) {
    if (c) rule += "-+-";
    rule += std::string(widths[c], '-');
  }
  out += rule + "\n";
  for (const auto& row : rows) out += line(row);
  return out;
}

}  // namespace

std::string render_pointwise_table(const std::vector<std::pair<std::string, PointwiseReport>>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& [label, r] : rows) {
    cells.push_back({label, std::to_string(r.n), fixed(r.accuracy), r.pearson_r ? fixed(*r.pearson_r) : "n/a"});
  }
  return render({"Model", "N", "Accuracy", "Pearson"}, cells);
}

std::string render_pairwise_table(const std::vector<std::pair<std::string, PairwiseReport>>& rows) {
  std::set<std::string> categories;
  for (const auto& [label, r] : rows) {
    for (const auto& [cat, acc] : r.per_category) categories.insert(cat);
  }
  std::vector<std::string> header{"Model"};
  header.insert(header.end(), categories.begin(), categories.end());
  header.push_back("Total");
  std::vector<std::vector<std::string>> cells;
  for (const auto& [label, r] : rows) {
    std::vector<std::string> row{label};
    for (const auto& cat : categories) {
      auto it = r.per_category.find(cat);
      row.push_back(it == r.per_category.end() ? "-" : fixed(it->second, 2));
    }
    row.push_back(fixed(r.total, 2));
    cells.push_back(std::move(row));
  }
  return render(header, cells);
}

}  // namespace sre
