#include "sre/parser.hpp"

#include <algorithm>

#include "sre/error.hpp"

namespace sre {

namespace {

constexpr std::string_view kResultMarker = "[RESULT]";
constexpr std::string_view kRatingMarker = "judgment rating:";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool is_lead_punct(char c) {
  return c == '(' || c == '[' || c == '{' || c == ':' || c == '*' || c == '"' || c == '\'' || c == '`' || c == '=';
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

/// Finds the last occurrence of `marker` (ASCII case-insensitive when asked).
std::size_t find_last(std::string_view text, std::string_view marker, bool ignore_case) {
  if (!ignore_case) return text.rfind(marker);
  if (text.size() < marker.size()) return std::string_view::npos;
  for (std::size_t pos = text.size() - marker.size() + 1; pos-- > 0;) {
    bool match = true;
    for (std::size_t k = 0; k < marker.size(); ++k) {
      if (ascii_lower(text[pos + k]) != marker[k]) {
        match = false;
        break;
      }
    }
    if (match) return pos;
  }
  return std::string_view::npos;
}

ParseResult parse_marked(std::string_view text, std::string_view marker, bool ignore_case, int max_value,
                         OutputFormat format) {
  const std::size_t pos = find_last(text, marker, ignore_case);
  if (pos == std::string_view::npos) return ParseError::missing_marker;

  std::string_view rest = text.substr(pos + marker.size());
  while (!rest.empty() && (is_space(rest.front()) || is_lead_punct(rest.front()))) rest.remove_prefix(1);

  std::size_t digits = 0;
  while (digits < rest.size() && rest[digits] >= '0' && rest[digits] <= '9') ++digits;
  if (digits == 0) return ParseError::missing_score;
  // Anything longer than 3 digits is out of range for every format; avoids overflow.
  if (digits > 3) return ParseError::out_of_range;
  int value = 0;
  for (std::size_t k = 0; k < digits; ++k) value = value * 10 + (rest[k] - '0');
  if (value < 1 || value > max_value) return ParseError::out_of_range;

  return ParsedJudgment{std::string(trim(text.substr(0, pos))), value, format};
}

}  // namespace

std::string_view to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::likert_1_5: return "likert_1_5";
    case OutputFormat::choice_1_2: return "choice_1_2";
    case OutputFormat::meta_rating_1_5: return "meta_rating_1_5";
  }
  return "likert_1_5";
}

OutputFormat parse_output_format(std::string_view s) {
  if (s == "likert_1_5") return OutputFormat::likert_1_5;
  if (s == "choice_1_2") return OutputFormat::choice_1_2;
  if (s == "meta_rating_1_5") return OutputFormat::meta_rating_1_5;
  throw ValidationError("unknown output format '" + std::string(s) + "'");
}

std::string_view to_string(ParseError e) {
  switch (e) {
    case ParseError::missing_marker: return "MissingMarker";
    case ParseError::missing_score: return "MissingScore";
    case ParseError::out_of_range: return "OutOfRange";
  }
  return "MissingMarker";
}

const ParsedJudgment& ParseResult::value() const {
  if (!judgment_) throw ValidationError("unparseable judgment: " + std::string(to_string(error_)));
  return *judgment_;
}

ParseResult parse_pointwise(std::string_view text) {
  return parse_marked(text, kResultMarker, false, 5, OutputFormat::likert_1_5);
}

ParseResult parse_pairwise(std::string_view text) {
  return parse_marked(text, kResultMarker, false, 2, OutputFormat::choice_1_2);
}

ParseResult parse_meta_rating(std::string_view text) {
  return parse_marked(text, kRatingMarker, true, 5, OutputFormat::meta_rating_1_5);
}

ParseResult parse_judgment(OutputFormat format, std::string_view text) {
  switch (format) {
    case OutputFormat::likert_1_5: return parse_pointwise(text);
    case OutputFormat::choice_1_2: return parse_pairwise(text);
    case OutputFormat::meta_rating_1_5: return parse_meta_rating(text);
  }
  return ParseError::missing_marker;
}

}  // namespace sre
