#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace sophia::verifier {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

enum class AnswerKind { kInteger, kRational, kDecimal, kInterval, kTuple, kRawString };

/// Canonical parsed form of an answer string.
///
/// Numeric kinds never pass through binary floating point: integers and
/// rationals hold an exact reduced value (denominator > 0), decimals hold the
/// digit string and a base-10 exponent so that 0.333 and 1/3 stay distinct.
struct AnswerExpr {
  AnswerKind kind = AnswerKind::kRawString;
  bool negative = false;

  Rational rational;    // kInteger, kRational
  std::string digits;   // kDecimal: no leading/trailing zeros, "0" for zero
  std::int64_t exponent = 0;

  std::vector<AnswerExpr> elements;  // kTuple members, or kInterval endpoints
  bool left_closed = false;          // kInterval
  bool right_closed = false;

  std::string text;  // kRawString: normalized text

  /// Exact value of a numeric kind (integer, rational, decimal).
  Rational exact_value() const;
  bool is_numeric() const;
};

struct VerifierOptions {
  /// Relative tolerance used when a decimal is compared against a rational
  /// whose decimal expansion does not terminate.
  Rational relative_tolerance{1, 10000};
  std::vector<std::string> answer_cues{"final answer is", "answer:"};
};

/// Final answer in free-form reasoning text: the content of the last balanced
/// `\boxed{...}`, else the rest of the line after the last answer cue. Text
/// outside `<think>` spans is searched before text inside them.
std::optional<std::string> extract_answer(std::string_view text,
                                          const VerifierOptions& options = {});

AnswerExpr parse_answer(std::string_view text);

bool equivalent(const AnswerExpr& a, const AnswerExpr& b, const VerifierOptions& options = {});

/// Symmetric, reflexive equivalence of two answer strings.
bool check_equivalence(std::string_view pred, std::string_view gold,
                       const VerifierOptions& options = {});

/// Binary outcome reward: 1 iff an answer can be extracted and matches gold.
int score_trajectory(std::string_view trajectory_text, std::string_view gold,
                     const VerifierOptions& options = {});

std::string describe(const AnswerExpr& expr);

}  // namespace sophia::verifier
