#include "sophia/verifier.hpp"

#include <algorithm>
#include <cctype>

namespace sophia::verifier {
namespace {

// Longer numerals degrade to raw strings; keeps bigint work bounded on
// adversarial input.
constexpr std::size_t kMaxDigits = 400;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Index one past the brace matching s[open] == '{', or npos when unbalanced.
std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '{') {
      ++depth;
    } else if (s[i] == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

// Replaces `\cmd{X}` with `X` for presentational commands.
void unwrap_command(std::string& s, std::string_view cmd) {
  std::size_t pos = 0;
  while ((pos = s.find(cmd, pos)) != std::string::npos) {
    std::size_t open = pos + cmd.size();
    while (open < s.size() && s[open] == ' ') ++open;
    if (open >= s.size() || s[open] != '{') {
      pos += cmd.size();
      continue;
    }
    const auto end = match_brace(s, open);
    if (end == std::string::npos) return;
    const std::string inner = s.substr(open + 1, end - open - 2);
    s.replace(pos, end - pos, inner);
  }
}

std::string strip_wrappers(std::string_view input) {
  std::string s(trim(input));
  replace_all(s, "\xE2\x88\x92", "-");  // U+2212 minus sign
  for (std::string_view spacing : {"\\left", "\\right", "\\!", "\\,", "\\;", "\\:", "\\ "}) {
    replace_all(s, spacing, "");
  }
  replace_all(s, "\\dfrac", "\\frac");
  replace_all(s, "\\tfrac", "\\frac");
  replace_all(s, "\\%", "%");
  for (std::string_view cmd : {"\\boxed", "\\text", "\\mathrm", "\\textbf", "\\mathbf"}) {
    unwrap_command(s, cmd);
  }

  bool changed = true;
  while (changed) {
    changed = false;
    std::string_view v = trim(s);
    if (v.size() >= 2 && v.front() == '$' && v.back() == '$') {
      v = v.substr(1, v.size() - 2);
      changed = true;
    } else if (v.size() >= 4 && (v.starts_with("\\(") && v.ends_with("\\)"))) {
      v = v.substr(2, v.size() - 4);
      changed = true;
    } else if (v.size() >= 4 && (v.starts_with("\\[") && v.ends_with("\\]"))) {
      v = v.substr(2, v.size() - 4);
      changed = true;
    } else if (!v.empty() && v.back() == '.') {
      v.remove_suffix(1);
      changed = true;
    }
    s = std::string(trim(v));
  }

  // "x = 5" -> "5" for a single short left-hand side.
  if (std::count(s.begin(), s.end(), '=') == 1) {
    const auto eq = s.find('=');
    const auto lhs = trim(std::string_view(s).substr(0, eq));
    const bool short_name =
        !lhs.empty() && lhs.size() <= 3 && std::isalpha(static_cast<unsigned char>(lhs[0])) &&
        std::all_of(lhs.begin(), lhs.end(),
                    [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; });
    if (short_name) s = std::string(trim(std::string_view(s).substr(eq + 1)));
  }
  return s;
}

std::string normalize_raw(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!is_space(c)) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

struct Numeral {
  bool negative = false;
  std::string int_digits;
  std::string frac_digits;
  bool has_point = false;
  std::int64_t exponent = 0;  // scientific notation
  bool has_exponent = false;
};

// [+-]? digits [. digits] | [+-]? . digits, then an optional e[+-]digits
std::optional<Numeral> parse_numeral(std::string_view s) {
  s = trim(s);
  Numeral n;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    n.negative = s.front() == '-';
    s.remove_prefix(1);
  }
  std::size_t i = 0;
  while (i < s.size() && is_digit(s[i])) n.int_digits.push_back(s[i++]);
  if (i < s.size() && s[i] == '.') {
    n.has_point = true;
    ++i;
    while (i < s.size() && is_digit(s[i])) n.frac_digits.push_back(s[i++]);
  }
  if (n.int_digits.empty() && n.frac_digits.empty()) return std::nullopt;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    bool negative_exponent = false;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) negative_exponent = s[i++] == '-';
    const std::size_t start = i;
    while (i < s.size() && is_digit(s[i]) && i - start < 4) {
      n.exponent = n.exponent * 10 + (s[i++] - '0');
    }
    if (i == start || n.exponent > static_cast<std::int64_t>(kMaxDigits)) return std::nullopt;
    if (negative_exponent) n.exponent = -n.exponent;
    n.has_exponent = true;
  }
  if (i != s.size()) return std::nullopt;
  if (n.int_digits.size() + n.frac_digits.size() > kMaxDigits) return std::nullopt;
  return n;
}

BigInt to_bigint(const std::string& digits) {
  BigInt out = 0;
  for (char c : digits) out = out * 10 + (c - '0');
  return out;
}

BigInt pow10(std::int64_t k) {
  BigInt out = 1;
  for (std::int64_t i = 0; i < k; ++i) out *= 10;
  return out;
}

Rational numeral_value(const Numeral& n) {
  const BigInt mantissa = to_bigint(n.int_digits + n.frac_digits);
  const std::int64_t scale = static_cast<std::int64_t>(n.frac_digits.size()) - n.exponent;
  Rational value = scale >= 0 ? Rational(mantissa, pow10(scale)) : Rational(mantissa * pow10(-scale));
  return n.negative ? Rational(-value) : value;
}

AnswerExpr make_rational(const Rational& value, AnswerKind kind) {
  AnswerExpr e;
  e.kind = kind;
  e.rational = value;
  e.negative = value < 0;
  return e;
}

// Decimal with value (-1)^negative * digits * 10^exponent, canonicalized.
AnswerExpr make_decimal(bool negative, std::string digits, std::int64_t exponent) {
  const auto first = digits.find_first_not_of('0');
  if (first == std::string::npos) {
    digits = "0";
    exponent = 0;
    negative = false;
  } else {
    digits.erase(0, first);
    while (digits.size() > 1 && digits.back() == '0') {
      digits.pop_back();
      ++exponent;
    }
  }
  AnswerExpr e;
  e.kind = AnswerKind::kDecimal;
  e.negative = negative;
  e.digits = std::move(digits);
  e.exponent = exponent;
  return e;
}

std::optional<Rational> parse_fraction_operand(std::string_view s) {
  const auto n = parse_numeral(s);
  if (!n) return std::nullopt;
  return numeral_value(*n);
}

std::optional<AnswerExpr> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;

  bool percent = false;
  if (s.back() == '%') {
    percent = true;
    s = trim(s.substr(0, s.size() - 1));
  }
  const Rational hundred(100);

  // \frac{a}{b}, optionally signed.
  {
    std::string_view body = s;
    bool negative = false;
    if (!body.empty() && (body.front() == '-' || body.front() == '+')) {
      negative = body.front() == '-';
      body = trim(body.substr(1));
    }
    if (body.starts_with("\\frac")) {
      std::size_t open = 5;
      while (open < body.size() && body[open] == ' ') ++open;
      if (open >= body.size() || body[open] != '{') return std::nullopt;
      const auto mid = match_brace(body, open);
      if (mid == std::string_view::npos || mid >= body.size() || body[mid] != '{') {
        return std::nullopt;
      }
      const auto end = match_brace(body, mid);
      if (end != body.size()) return std::nullopt;
      const auto num = parse_fraction_operand(body.substr(open + 1, mid - open - 2));
      const auto den = parse_fraction_operand(body.substr(mid + 1, end - mid - 2));
      if (!num || !den || *den == 0) return std::nullopt;
      Rational value = *num / *den;
      if (negative) value = -value;
      if (percent) value /= hundred;
      return make_rational(value, AnswerKind::kRational);
    }
  }

  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    const auto num = parse_fraction_operand(s.substr(0, slash));
    const auto den = parse_fraction_operand(s.substr(slash + 1));
    if (!num || !den || *den == 0) return std::nullopt;
    Rational value = *num / *den;
    if (percent) value /= hundred;
    return make_rational(value, AnswerKind::kRational);
  }

  const auto n = parse_numeral(s);
  if (!n) return std::nullopt;
  if (!n->has_point && !n->has_exponent) {
    const Rational value = numeral_value(*n);
    if (percent) return make_rational(value / hundred, AnswerKind::kRational);
    return make_rational(value, AnswerKind::kInteger);
  }
  const std::int64_t shift = percent ? 2 : 0;
  return make_decimal(n->negative, n->int_digits + n->frac_digits,
                      n->exponent - static_cast<std::int64_t>(n->frac_digits.size()) - shift);
}

// Splits on commas at bracket depth zero.
std::vector<std::string_view> split_top_level(std::string_view s) {
  std::vector<std::string_view> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  parts.push_back(s.substr(start));
  return parts;
}

// The outer bracket pair encloses the whole string.
bool outer_pair_spans(std::string_view s) {
  if (s.size() < 2) return false;
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') --depth;
    if (depth == 0 && i + 1 < s.size()) return false;
  }
  return depth == 0;
}

bool is_thousands_grouped(std::string_view s) {
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) s.remove_prefix(1);
  if (!s.empty() && s.back() == '%') s.remove_suffix(1);
  const auto point = s.find('.');
  std::string_view whole = s.substr(0, point);
  if (point != std::string_view::npos) {
    const auto frac = s.substr(point + 1);
    if (frac.empty() || !std::all_of(frac.begin(), frac.end(), is_digit)) return false;
  }
  const auto groups = split_top_level(whole);
  if (groups.size() < 2) return false;
  if (groups[0].empty() || groups[0].size() > 3 ||
      !std::all_of(groups[0].begin(), groups[0].end(), is_digit)) {
    return false;
  }
  for (std::size_t i = 1; i < groups.size(); ++i) {
    if (groups[i].size() != 3 || !std::all_of(groups[i].begin(), groups[i].end(), is_digit)) {
      return false;
    }
  }
  return true;
}

AnswerExpr parse_normalized(std::string_view s, int depth);

AnswerExpr make_raw(std::string_view s) {
  AnswerExpr e;
  e.kind = AnswerKind::kRawString;
  e.text = normalize_raw(s);
  return e;
}

std::optional<AnswerExpr> parse_bracketed(std::string_view s, int depth, bool force_interval) {
  if (!outer_pair_spans(s)) return std::nullopt;
  const char open = s.front();
  const char close = s.back();
  const bool round_open = open == '(';
  const bool round_close = close == ')';
  if ((open != '(' && open != '[' && open != '{') || (close != ')' && close != ']' && close != '}')) {
    return std::nullopt;
  }
  const auto inner = s.substr(1, s.size() - 2);
  const auto parts = split_top_level(inner);
  if (parts.size() == 1 && !force_interval) return parse_normalized(inner, depth + 1);

  const bool interval_brackets = (open == '[' || open == '(') && (close == ']' || close == ')');
  const bool is_interval =
      parts.size() == 2 && interval_brackets && (force_interval || !(round_open && round_close));
  AnswerExpr e;
  e.kind = is_interval ? AnswerKind::kInterval : AnswerKind::kTuple;
  if (is_interval) {
    e.left_closed = open == '[';
    e.right_closed = close == ']';
  }
  for (auto part : parts) e.elements.push_back(parse_normalized(trim(part), depth + 1));
  return e;
}

AnswerExpr parse_normalized(std::string_view s, int depth) {
  s = trim(s);
  if (depth > 32) return make_raw(s);

  bool force_interval = false;
  if (lower_ascii(s.substr(0, 9)) == "interval:") {
    force_interval = true;
    s = trim(s.substr(9));
  }
  if (auto bracketed = parse_bracketed(s, depth, force_interval)) return *bracketed;
  if (force_interval) return make_raw(s);

  if (is_thousands_grouped(s)) {
    std::string plain;
    for (char c : s) {
      if (c != ',') plain.push_back(c);
    }
    if (auto number = parse_number(plain)) return *number;
  }

  const auto parts = split_top_level(s);
  if (parts.size() > 1) {
    AnswerExpr e;
    e.kind = AnswerKind::kTuple;
    for (auto part : parts) e.elements.push_back(parse_normalized(trim(part), depth + 1));
    return e;
  }

  if (auto number = parse_number(s)) return *number;
  return make_raw(s);
}

bool has_terminating_expansion(const Rational& r) {
  BigInt den = boost::multiprecision::denominator(r);
  while (den % 2 == 0) den /= 2;
  while (den % 5 == 0) den /= 5;
  return den == 1;
}

bool within_relative(const Rational& approx, const Rational& exact, const Rational& tolerance) {
  const Rational diff = abs(approx - exact);
  return diff <= tolerance * abs(exact);
}

bool numeric_equivalent(const AnswerExpr& a, const AnswerExpr& b, const VerifierOptions& options) {
  const bool a_dec = a.kind == AnswerKind::kDecimal;
  const bool b_dec = b.kind == AnswerKind::kDecimal;
  const Rational av = a.exact_value();
  const Rational bv = b.exact_value();
  if (a_dec == b_dec) return av == bv;
  const Rational& exact = a_dec ? bv : av;
  const Rational& approx = a_dec ? av : bv;
  if (has_terminating_expansion(exact)) return approx == exact;
  return within_relative(approx, exact, options.relative_tolerance);
}

// Line remainder after the last occurrence of any cue, or nullopt.
std::optional<std::string> find_after_cue(std::string_view region,
                                          const std::vector<std::string>& cues) {
  const std::string lowered = lower_ascii(region);
  std::vector<std::pair<std::size_t, std::size_t>> hits;  // (position, cue length)
  for (const auto& cue : cues) {
    if (cue.empty()) continue;
    const std::string needle = lower_ascii(cue);
    for (auto pos = lowered.find(needle); pos != std::string::npos;
         pos = lowered.find(needle, pos + 1)) {
      hits.emplace_back(pos, needle.size());
    }
  }
  std::sort(hits.begin(), hits.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second > y.second;
  });
  for (const auto& [pos, len] : hits) {
    std::string_view rest = region.substr(pos + len);
    rest = rest.substr(0, rest.find('\n'));
    rest = trim(rest);
    while (!rest.empty() && (rest.front() == ':' || rest.front() == '*' || is_space(rest.front()))) {
      rest.remove_prefix(1);
    }
    while (!rest.empty() && (rest.back() == '.' || rest.back() == '*' || is_space(rest.back()))) {
      rest.remove_suffix(1);
    }
    if (!rest.empty()) return std::string(rest);
  }
  return std::nullopt;
}

std::optional<std::string> find_last_boxed(std::string_view region) {
  static constexpr std::string_view kMarker = "\\boxed";
  std::size_t search_end = region.size();
  while (search_end > 0) {
    const auto pos = region.rfind(kMarker, search_end - 1);
    if (pos == std::string_view::npos) break;
    search_end = pos;
    std::size_t open = pos + kMarker.size();
    while (open < region.size() && region[open] == ' ') ++open;
    if (open >= region.size() || region[open] != '{') continue;
    const auto end = match_brace(region, open);
    if (end == std::string_view::npos) continue;
    std::string_view content = trim(region.substr(open + 1, end - open - 2));
    // \boxed{\boxed{x}} -> x
    while (content.starts_with(kMarker)) {
      std::size_t inner_open = kMarker.size();
      while (inner_open < content.size() && content[inner_open] == ' ') ++inner_open;
      if (inner_open >= content.size() || content[inner_open] != '{') break;
      const auto inner_end = match_brace(content, inner_open);
      if (inner_end != content.size()) break;
      content = trim(content.substr(inner_open + 1, inner_end - inner_open - 2));
    }
    if (!content.empty()) return std::string(content);
  }
  return std::nullopt;
}

struct Regions {
  std::string outside;
  std::string inside;
};

Regions split_think(std::string_view text) {
  static constexpr std::string_view kOpen = "<think>";
  static constexpr std::string_view kClose = "</think>";
  Regions r;
  std::size_t pos = 0;
  const auto first_open = text.find(kOpen);
  const auto first_close = text.find(kClose);
  // Reasoning models often omit the opening tag; a leading orphan close ends
  // a think span that started at the beginning of the text.
  if (first_close != std::string_view::npos &&
      (first_open == std::string_view::npos || first_close < first_open)) {
    r.inside.append(text.substr(0, first_close));
    r.inside.push_back('\n');
    pos = first_close + kClose.size();
  }
  while (pos <= text.size()) {
    const auto open = text.find(kOpen, pos);
    if (open == std::string_view::npos) {
      r.outside.append(text.substr(pos));
      break;
    }
    r.outside.append(text.substr(pos, open - pos));
    r.outside.push_back('\n');
    const auto close = text.find(kClose, open + kOpen.size());
    if (close == std::string_view::npos) {
      r.inside.append(text.substr(open + kOpen.size()));
      break;
    }
    r.inside.append(text.substr(open + kOpen.size(), close - open - kOpen.size()));
    r.inside.push_back('\n');
    pos = close + kClose.size();
  }
  return r;
}

std::optional<std::string> extract_from_region(std::string_view region,
                                               const VerifierOptions& options) {
  if (auto boxed = find_last_boxed(region)) return boxed;
  return find_after_cue(region, options.answer_cues);
}

}  // namespace

Rational AnswerExpr::exact_value() const {
  switch (kind) {
    case AnswerKind::kInteger:
    case AnswerKind::kRational:
      return rational;
    case AnswerKind::kDecimal: {
      const BigInt mantissa = to_bigint(digits);
      Rational value = exponent >= 0 ? Rational(mantissa * pow10(exponent))
                                     : Rational(mantissa, pow10(-exponent));
      return negative ? Rational(-value) : value;
    }
    default:
      return Rational(0);
  }
}

bool AnswerExpr::is_numeric() const {
  return kind == AnswerKind::kInteger || kind == AnswerKind::kRational ||
         kind == AnswerKind::kDecimal;
}

std::optional<std::string> extract_answer(std::string_view text, const VerifierOptions& options) {
  const Regions regions = split_think(text);
  if (auto found = extract_from_region(regions.outside, options)) return found;
  return extract_from_region(regions.inside, options);
}

AnswerExpr parse_answer(std::string_view text) {
  return parse_normalized(strip_wrappers(text), 0);
}

bool equivalent(const AnswerExpr& a, const AnswerExpr& b, const VerifierOptions& options) {
  if (a.is_numeric() && b.is_numeric()) return numeric_equivalent(a, b, options);
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case AnswerKind::kRawString:
      return a.text == b.text;
    case AnswerKind::kInterval:
      if (a.left_closed != b.left_closed || a.right_closed != b.right_closed) return false;
      [[fallthrough]];
    case AnswerKind::kTuple:
      if (a.elements.size() != b.elements.size()) return false;
      for (std::size_t i = 0; i < a.elements.size(); ++i) {
        if (!equivalent(a.elements[i], b.elements[i], options)) return false;
      }
      return true;
    default:
      return false;
  }
}

bool check_equivalence(std::string_view pred, std::string_view gold,
                       const VerifierOptions& options) {
  return equivalent(parse_answer(pred), parse_answer(gold), options);
}

int score_trajectory(std::string_view trajectory_text, std::string_view gold,
                     const VerifierOptions& options) {
  const auto answer = extract_answer(trajectory_text, options);
  if (!answer) return 0;
  return check_equivalence(*answer, gold, options) ? 1 : 0;
}

std::string describe(const AnswerExpr& e) {
  switch (e.kind) {
    case AnswerKind::kInteger:
      return "integer(" + e.rational.str() + ")";
    case AnswerKind::kRational:
      return "rational(" + e.rational.str() + ")";
    case AnswerKind::kDecimal:
      return std::string("decimal(") + (e.negative ? "-" : "") + e.digits + "e" +
             std::to_string(e.exponent) + ")";
    case AnswerKind::kInterval:
    case AnswerKind::kTuple: {
      std::string out = e.kind == AnswerKind::kTuple ? "tuple(" : (e.left_closed ? "interval[" : "interval(");
      for (std::size_t i = 0; i < e.elements.size(); ++i) {
        if (i) out += ", ";
        out += describe(e.elements[i]);
      }
      out += e.kind == AnswerKind::kTuple ? ")" : (e.right_closed ? "]" : ")");
      return out;
    }
    case AnswerKind::kRawString:
      return "raw(" + e.text + ")";
  }
  return "raw()";
}

}  // namespace sophia::verifier
