#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sre/dataset.hpp"
#include "sre/parser.hpp"

namespace sre {

struct PromptBundle {
  std::string system;
  std::string user;
  OutputFormat expected_format = OutputFormat::likert_1_5;

  bool operator==(const PromptBundle&) const = default;
};

Json to_json(const PromptBundle& b);
PromptBundle bundle_from_json(const Json& j);

/// Template text for every prompt family. Defaults are compiled in from templates/*.txt.
struct PromptTemplates {
  std::string pointwise_system;
  std::string pointwise_user;
  std::string pairwise_system;
  std::string pairwise_user;
  std::string meta_judge_system;
  std::string meta_judge_user;

  static const PromptTemplates& defaults();
  /// Defaults, with any of <dir>/<family>.txt present on disk taking precedence.
  static PromptTemplates with_overrides(const std::filesystem::path& dir);
};

/// Variables for render_template. Loop collections hold one field map per element,
/// keyed by field name ("score", "description", "role", "content").
struct TemplateContext {
  std::map<std::string, std::string, std::less<>> scalars;
  std::map<std::string, std::vector<std::map<std::string, std::string, std::less<>>>, std::less<>> lists;
};

/// Line-based template expansion.
///
/// `{{ name }}` and `{{ var.field }}` are substituted (inner whitespace ignored).
/// A line consisting of `{% for var in list %}` opens a loop whose body lines are
/// emitted once per element of `list`; `{% endfor %}` closes it. Tag lines produce
/// no output. One trailing newline of the template is dropped. Unknown variables
/// throw ValidationError.
std::string render_template(std::string_view tpl, const TemplateContext& ctx);

PromptBundle render_pointwise(const EvaluationItem& item,
                              const PromptTemplates& templates = PromptTemplates::defaults());
PromptBundle render_pairwise(const EvaluationItem& item,
                             const PromptTemplates& templates = PromptTemplates::defaults());
PromptBundle render_meta_judge(const EvaluationItem& item, const JudgmentRecord& judgment,
                               const PromptTemplates& templates = PromptTemplates::defaults());
/// Dispatches on item.task_type.
PromptBundle render_judge_prompt(const EvaluationItem& item,
                                 const PromptTemplates& templates = PromptTemplates::defaults());

/// The generic helpful/honest/harmless rubric used for benchmarks without per-item criteria.
ScoringCriteria default_reward_bench_criteria();

/// "- Score k: description" lines, as they appear inside the criteria block.
std::vector<std::string> criteria_lines(const ScoringCriteria& criteria);

}  // namespace sre
