#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace sre {

enum class OutputFormat { likert_1_5, choice_1_2, meta_rating_1_5 };

std::string_view to_string(OutputFormat f);
OutputFormat parse_output_format(std::string_view s);

enum class ParseError { missing_marker, missing_score, out_of_range };

std::string_view to_string(ParseError e);

struct ParsedJudgment {
  std::string rationale;
  int value = 0;
  OutputFormat format = OutputFormat::likert_1_5;
};

/// Either a parsed judgment or the reason it could not be parsed. Never throws on input text.
class ParseResult {
 public:
  ParseResult(ParsedJudgment judgment) : judgment_(std::move(judgment)) {}
  ParseResult(ParseError error) : error_(error) {}

  explicit operator bool() const { return judgment_.has_value(); }
  bool ok() const { return judgment_.has_value(); }
  const ParsedJudgment& operator*() const { return *judgment_; }
  const ParsedJudgment* operator->() const { return &*judgment_; }
  /// Throws sre::ValidationError when parsing failed.
  const ParsedJudgment& value() const;
  ParseError error() const { return error_; }

 private:
  std::optional<ParsedJudgment> judgment_;
  ParseError error_ = ParseError::missing_marker;
};

/// "(rationale) [RESULT] (1-5)". The last "[RESULT]" marker wins.
ParseResult parse_pointwise(std::string_view text);

/// "(rationale) [RESULT] (1 or 2)".
ParseResult parse_pairwise(std::string_view text);

/// "... Judgment rating: <1-5>", marker matched case-insensitively, last occurrence wins.
ParseResult parse_meta_rating(std::string_view text);

ParseResult parse_judgment(OutputFormat format, std::string_view text);

}  // namespace sre
