#include "consortium/answer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "consortium/errors.hpp"

namespace consortium {

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::MultipleChoice ? "multiple_choice" : "math";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "multiple_choice") return TaskKind::MultipleChoice;
  if (text == "math") return TaskKind::Math;
  throw DataError("unknown task kind '" + std::string(text) + "'");
}

Rational::Rational(std::int64_t numerator, std::int64_t denominator) {
  if (denominator == 0) throw std::invalid_argument("rational with zero denominator");
  if (denominator < 0) {
    if (numerator == std::numeric_limits<std::int64_t>::min() ||
        denominator == std::numeric_limits<std::int64_t>::min())
      throw std::overflow_error("rational out of range");
    numerator = -numerator;
    denominator = -denominator;
  }
  const std::int64_t g = std::gcd(numerator, denominator);
  num_ = numerator / (g == 0 ? 1 : g);
  den_ = denominator / (g == 0 ? 1 : g);
}

std::string Rational::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

CanonicalAnswer CanonicalAnswer::option(char label) {
  CanonicalAnswer a;
  a.value_ = OptionAnswer{static_cast<char>(std::toupper(static_cast<unsigned char>(label)))};
  return a;
}

CanonicalAnswer CanonicalAnswer::number(NumberAnswer number) {
  CanonicalAnswer a;
  a.value_ = std::move(number);
  return a;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string CanonicalAnswer::key() const {
  if (const auto* o = as_option()) return std::string(1, o->label);
  if (const auto* n = as_number()) return n->exact ? n->exact->to_string() : format_double(n->value);
  return {};
}

std::string CanonicalAnswer::surface() const {
  if (const auto* n = as_number()) return n->surface;
  return key();
}

bool equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b, TaskKind kind) {
  if (kind == TaskKind::MultipleChoice) {
    const auto* x = a.as_option();
    const auto* y = b.as_option();
    return x && y && x->label == y->label;
  }
  const auto* x = a.as_number();
  const auto* y = b.as_number();
  if (!x || !y) return false;
  if (x->exact && y->exact) return *x->exact == *y->exact;
  const double scale = std::max(std::fabs(x->value), std::fabs(y->value));
  if (scale == 0.0) return true;
  return std::fabs(x->value - y->value) <= 1e-6 * scale;
}

namespace {

using Wide = __int128;
constexpr Wide kLimit = static_cast<Wide>(std::numeric_limits<std::int64_t>::max());

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Accumulates decimal digits into `acc`, returning false on overflow.
bool push_digit(Wide& acc, char c) {
  acc = acc * 10 + (c - '0');
  return acc <= kLimit;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool consume(std::string_view& s, std::string_view prefix) {
  if (s.substr(0, prefix.size()) == prefix) {
    s.remove_prefix(prefix.size());
    return true;
  }
  return false;
}

bool consume_currency(std::string_view& s) {
  return consume(s, "$") || consume(s, "\xE2\x82\xAC") /* € */ || consume(s, "\xC2\xA3") /* £ */;
}

bool consume_minus(std::string_view& s) {
  return consume(s, "-") || consume(s, "\xE2\x88\x92") /* − */;
}

}  // namespace

std::optional<NumberAnswer> parse_number(std::string_view text) {
  std::string_view s = trim(text);
  const std::string surface(s);
  bool negative = false;
  // Sign and currency may come in either order: "-$5", "$-5".
  if (consume_minus(s)) negative = true;
  s = trim(s);
  if (consume_currency(s)) {
    s = trim(s);
    if (!negative && consume_minus(s)) negative = true;
  }
  if (s.empty()) return std::nullopt;

  std::string digits;  // integer part without separators
  std::size_t i = 0;
  while (i < s.size() && is_digit(s[i])) digits += s[i++];
  // Thousands groups: ",ddd" only, and only after a leading group of at most three digits.
  if (!digits.empty() && digits.size() <= 3) {
    while (i + 3 < s.size() && s[i] == ',' && is_digit(s[i + 1]) && is_digit(s[i + 2]) &&
           is_digit(s[i + 3]) && (i + 4 >= s.size() || !is_digit(s[i + 4]))) {
      digits.append(s.substr(i + 1, 3));
      i += 4;
    }
  }
  std::string fraction;
  if (i < s.size() && s[i] == '.') {
    std::size_t j = i + 1;
    while (j < s.size() && is_digit(s[j])) fraction += s[j++];
    if (fraction.empty() && digits.empty()) return std::nullopt;
    i = j;
  }
  if (digits.empty() && fraction.empty()) return std::nullopt;

  std::string denominator_digits;
  {
    std::string_view rest = trim(s.substr(i));
    if (!rest.empty() && rest.front() == '/' && fraction.empty()) {
      rest.remove_prefix(1);
      rest = trim(rest);
      std::size_t j = 0;
      while (j < rest.size() && is_digit(rest[j])) denominator_digits += rest[j++];
      if (denominator_digits.empty()) return std::nullopt;
      rest = rest.substr(j);
    }
    rest = trim(rest);
    if (!rest.empty() && rest.front() == '%') rest.remove_prefix(1);
    if (!trim(rest).empty()) return std::nullopt;
  }

  NumberAnswer out;
  out.surface = surface;

  Wide num = 0;
  Wide den = 1;
  bool exact = true;
  for (char c : digits) exact = exact && push_digit(num, c);
  for (char c : fraction) {
    exact = exact && push_digit(num, c);
    den *= 10;
    exact = exact && den <= kLimit;
  }
  if (!denominator_digits.empty()) {
    Wide d = 0;
    for (char c : denominator_digits) exact = exact && push_digit(d, c);
    if (exact && d == 0) return std::nullopt;
    den = d;
  }

  if (exact) {
    const auto n64 = static_cast<std::int64_t>(num);
    const auto d64 = static_cast<std::int64_t>(den);
    out.exact = Rational(negative ? -n64 : n64, d64);
    out.value = out.exact->to_double();
  } else {
    std::string plain = (digits.empty() ? "0" : digits) + (fraction.empty() ? "" : "." + fraction);
    double v = std::strtod(plain.c_str(), nullptr);
    if (!denominator_digits.empty()) v /= std::strtod(denominator_digits.c_str(), nullptr);
    out.value = negative ? -v : v;
  }
  return out;
}

CanonicalAnswer parse_gold(std::string_view text, TaskKind kind, std::span<const char> labels) {
  const std::string_view t = trim(text);
  if (kind == TaskKind::MultipleChoice) {
    std::string_view label = t;
    if (label.size() == 3 && label.front() == '(' && label.back() == ')') label = label.substr(1, 1);
    if (label.size() != 1 || !std::isalpha(static_cast<unsigned char>(label[0])))
      throw DataError("gold '" + std::string(text) + "' is not an option letter");
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
    if (std::find(labels.begin(), labels.end(), up) == labels.end())
      throw DataError("gold '" + std::string(text) + "' is not one of the question's options");
    return CanonicalAnswer::option(up);
  }
  auto number = parse_number(t);
  if (!number) throw DataError("gold '" + std::string(text) + "' is not a number");
  return CanonicalAnswer::number(std::move(*number));
}

}  // namespace consortium
