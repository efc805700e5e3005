#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

namespace consortium {

enum class TaskKind { MultipleChoice, Math };

std::string_view to_string(TaskKind kind);
/// Accepts "multiple_choice" or "math"; throws DataError otherwise.
TaskKind parse_task_kind(std::string_view text);

/// Exact rational in lowest terms with a positive denominator.
class Rational {
 public:
  Rational() = default;
  Rational(std::int64_t numerator, std::int64_t denominator = 1);

  std::int64_t numerator() const noexcept { return num_; }
  std::int64_t denominator() const noexcept { return den_; }
  double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
  /// "p" for integers, "p/q" otherwise.
  std::string to_string() const;

  friend bool operator==(const Rational&, const Rational&) = default;

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

struct OptionAnswer {
  char label = 'A';  // always uppercase
};

struct NumberAnswer {
  std::optional<Rational> exact;  // empty when the surface form overflowed 64-bit arithmetic
  double value = 0.0;
  std::string surface;
};

struct Unparseable {};

/// Final answer extracted from one response, or from a gold label.
class CanonicalAnswer {
 public:
  CanonicalAnswer() = default;

  static CanonicalAnswer option(char label);
  static CanonicalAnswer number(NumberAnswer number);
  static CanonicalAnswer unparseable() { return {}; }

  bool is_option() const noexcept { return std::holds_alternative<OptionAnswer>(value_); }
  bool is_number() const noexcept { return std::holds_alternative<NumberAnswer>(value_); }
  bool is_parseable() const noexcept { return !std::holds_alternative<Unparseable>(value_); }

  const OptionAnswer* as_option() const noexcept { return std::get_if<OptionAnswer>(&value_); }
  const NumberAnswer* as_number() const noexcept { return std::get_if<NumberAnswer>(&value_); }

  /// Stable textual key: "B", "1024", "1/2", a %.17g double for inexact numbers, "" when unparseable.
  std::string key() const;
  /// Original text for numbers; same as key() otherwise.
  std::string surface() const;

 private:
  std::variant<Unparseable, OptionAnswer, NumberAnswer> value_;
};

/// Task-specific equivalence used both for clustering and for grading against gold.
/// Unparseable is equivalent to nothing, including itself.
bool equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b, TaskKind kind);

/// Parses one numeric surface form ("1,024", "-$3.50", "3/4", "12%"). Thousands separators and
/// currency symbols are dropped, percent forms keep their magnitude. Returns nullopt if `text`
/// is not exactly one number.
std::optional<NumberAnswer> parse_number(std::string_view text);

/// Parses a gold label for a question of the given kind. For multiple choice the label must
/// be one of `labels`. Throws DataError when the gold does not parse.
CanonicalAnswer parse_gold(std::string_view text, TaskKind kind, std::span<const char> labels);

}  // namespace consortium
