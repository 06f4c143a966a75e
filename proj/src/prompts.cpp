#include "sre/prompts.hpp"

#include <sstream>

#include "embedded_templates.hpp"
#include "sre/error.hpp"

namespace sre {

namespace {

using FieldMap = std::map<std::string, std::string, std::less<>>;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

struct LoopTag {
  std::string var;
  std::string list;
};

// Recognizes "{% for var in list %}" (surrounding whitespace allowed).
std::optional<LoopTag> parse_for_tag(std::string_view line) {
  line = trim(line);
  if (!line.starts_with("{%") || !line.ends_with("%}")) return std::nullopt;
  std::istringstream words(std::string(line.substr(2, line.size() - 4)));
  std::string kw_for, var, kw_in, list, extra;
  if (!(words >> kw_for >> var >> kw_in >> list) || (words >> extra) || kw_for != "for" || kw_in != "in") {
    return std::nullopt;
  }
  return LoopTag{var, list};
}

bool is_endfor_tag(std::string_view line) {
  line = trim(line);
  if (!line.starts_with("{%") || !line.ends_with("%}")) return false;
  return trim(line.substr(2, line.size() - 4)) == "endfor";
}

std::string substitute(std::string_view line, const TemplateContext& ctx, const LoopTag* loop,
                       const FieldMap* element) {
  std::string out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const std::size_t open = line.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(line.substr(pos));
      break;
    }
    const std::size_t close = line.find("}}", open + 2);
    if (close == std::string_view::npos) throw ValidationError("unterminated placeholder in template");
    out.append(line.substr(pos, open - pos));
    const std::string_view name = trim(line.substr(open + 2, close - open - 2));
    bool found = false;
    if (loop && element) {
      const std::string prefix = loop->var + ".";
      if (name.starts_with(prefix)) {
        auto it = element->find(name.substr(prefix.size()));
        if (it != element->end()) {
          out.append(it->second);
          found = true;
        }
      }
    }
    if (!found) {
      auto it = ctx.scalars.find(name);
      if (it == ctx.scalars.end()) throw ValidationError("unknown template variable '" + std::string(name) + "'");
      out.append(it->second);
    }
    pos = close + 2;
  }
  return out;
}

FieldMap message_fields(const Message& m) { return {{"role", std::string(to_string(m.role))}, {"content", m.content}}; }

void add_message(TemplateContext& ctx, const std::string& prefix, const Message& m) {
  ctx.scalars[prefix + ".role"] = std::string(to_string(m.role));
  ctx.scalars[prefix + ".content"] = m.content;
}

TemplateContext base_context(const EvaluationItem& item) {
  item.criteria.validate();
  TemplateContext ctx;
  auto& criteria = ctx.lists["criteria"];
  for (const auto& e : item.criteria.entries) {
    criteria.push_back({{"score", std::to_string(e.score)}, {"description", e.description}});
  }
  auto& conversation = ctx.lists["conversation"];
  for (const auto& m : item.conversation) conversation.push_back(message_fields(m));
  return ctx;
}

std::string strip_one_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

}  // namespace

std::string render_template(std::string_view tpl, const TemplateContext& ctx) {
  if (tpl.ends_with('\n')) tpl.remove_suffix(1);
  const auto lines = split_lines(tpl);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (auto tag = parse_for_tag(lines[i])) {
      std::size_t end = i + 1;
      while (end < lines.size() && !is_endfor_tag(lines[end])) {
        if (parse_for_tag(lines[end])) throw ValidationError("nested loops are not supported in templates");
        ++end;
      }
      if (end == lines.size()) throw ValidationError("unterminated {% for %} in template");
      auto it = ctx.lists.find(tag->list);
      if (it == ctx.lists.end()) throw ValidationError("unknown template list '" + tag->list + "'");
      for (const auto& element : it->second) {
        for (std::size_t k = i + 1; k < end; ++k) out.push_back(substitute(lines[k], ctx, &*tag, &element));
      }
      i = end;
    } else if (is_endfor_tag(lines[i])) {
      throw ValidationError("{% endfor %} without matching {% for %}");
    } else {
      out.push_back(substitute(lines[i], ctx, nullptr, nullptr));
    }
  }
  std::string joined;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i) joined += '\n';
    joined += out[i];
  }
  return joined;
}

const PromptTemplates& PromptTemplates::defaults() {
  static const PromptTemplates t{
      strip_one_newline(embedded::kPointwiseSystem), embedded::kPointwiseUser,
      strip_one_newline(embedded::kPairwiseSystem),  embedded::kPairwiseUser,
      strip_one_newline(embedded::kMetaJudgeSystem), embedded::kMetaJudgeUser,
  };
  return t;
}

PromptTemplates PromptTemplates::with_overrides(const std::filesystem::path& dir) {
  PromptTemplates t = defaults();
  auto load = [&](const char* name, std::string& slot, bool literal) {
    const auto path = dir / name;
    if (std::filesystem::exists(path)) {
      slot = read_text_file(path);
      if (literal) slot = strip_one_newline(slot);
    }
  };
  load("pointwise_system.txt", t.pointwise_system, true);
  load("pointwise_user.txt", t.pointwise_user, false);
  load("pairwise_system.txt", t.pairwise_system, true);
  load("pairwise_user.txt", t.pairwise_user, false);
  load("meta_judge_system.txt", t.meta_judge_system, true);
  load("meta_judge_user.txt", t.meta_judge_user, false);
  return t;
}

Json to_json(const PromptBundle& b) {
  return Json{{"system", b.system}, {"user", b.user}, {"expected_format", to_string(b.expected_format)}};
}

PromptBundle bundle_from_json(const Json& j) {
  return PromptBundle{j.at("system").get<std::string>(), j.at("user").get<std::string>(),
                      parse_output_format(j.at("expected_format").get<std::string>())};
}

PromptBundle render_pointwise(const EvaluationItem& item, const PromptTemplates& templates) {
  if (item.task_type != TaskType::pointwise) {
    throw ValidationError("render_pointwise: item '" + item.id + "' is not pointwise");
  }
  if (!item.response) throw ValidationError("render_pointwise: item '" + item.id + "' has no response");
  TemplateContext ctx = base_context(item);
  add_message(ctx, "response", *item.response);
  return {templates.pointwise_system, render_template(templates.pointwise_user, ctx), OutputFormat::likert_1_5};
}

PromptBundle render_pairwise(const EvaluationItem& item, const PromptTemplates& templates) {
  if (item.task_type != TaskType::pairwise) {
    throw ValidationError("render_pairwise: item '" + item.id + "' is not pairwise");
  }
  if (!item.response_1 || !item.response_2) {
    throw ValidationError("render_pairwise: item '" + item.id + "' needs response_1 and response_2");
  }
  TemplateContext ctx = base_context(item);
  add_message(ctx, "response1", *item.response_1);
  add_message(ctx, "response2", *item.response_2);
  return {templates.pairwise_system, render_template(templates.pairwise_user, ctx), OutputFormat::choice_1_2};
}

PromptBundle render_meta_judge(const EvaluationItem& item, const JudgmentRecord& judgment,
                               const PromptTemplates& templates) {
  if (item.task_type != TaskType::pointwise || !item.response) {
    throw ValidationError("render_meta_judge: item '" + item.id + "' is not pointwise");
  }
  if (judgment.item_id != item.id) {
    throw ValidationError("render_meta_judge: judgment for '" + judgment.item_id + "' does not belong to item '" +
                          item.id + "'");
  }
  TemplateContext ctx = base_context(item);
  add_message(ctx, "response", *item.response);
  ctx.scalars["judgement"] = judgment.raw_text;
  return {templates.meta_judge_system, render_template(templates.meta_judge_user, ctx),
          OutputFormat::meta_rating_1_5};
}

PromptBundle render_judge_prompt(const EvaluationItem& item, const PromptTemplates& templates) {
  return item.task_type == TaskType::pointwise ? render_pointwise(item, templates)
                                               : render_pairwise(item, templates);
}

ScoringCriteria default_reward_bench_criteria() {
  static const ScoringCriteria criteria = [] {
    ScoringCriteria c;
    for (std::string_view line : split_lines(embedded::kRewardBenchCriteria)) {
      line = trim(line);
      if (line.empty()) continue;
      // "- Score k: description"
      constexpr std::string_view prefix = "- Score ";
      const std::size_t colon = line.find(':');
      if (!line.starts_with(prefix) || colon == std::string_view::npos) {
        throw ValidationError("malformed embedded criteria line");
      }
      const int score = std::stoi(std::string(line.substr(prefix.size(), colon - prefix.size())));
      c.entries.push_back({score, std::string(trim(line.substr(colon + 1)))});
    }
    c.validate();
    return c;
  }();
  return criteria;
}

std::vector<std::string> criteria_lines(const ScoringCriteria& criteria) {
  std::vector<std::string> lines;
  for (const auto& e : criteria.entries) lines.push_back("- Score " + std::to_string(e.score) + ": " + e.description);
  return lines;
}

}  // namespace sre
