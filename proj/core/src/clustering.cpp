#include "consortium/clustering.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "consortium/errors.hpp"

namespace consortium {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool starts_with_icase(std::string_view text, std::size_t pos, std::string_view word) {
  if (pos + word.size() > text.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i)
    if (lower(text[pos + i]) != word[i]) return false;
  return true;
}

std::size_t skip(std::string_view text, std::size_t pos, std::string_view chars) {
  while (pos < text.size() && chars.find(text[pos]) != std::string_view::npos) ++pos;
  return pos;
}

struct LetterMatch {
  std::size_t pos;
  char letter;
};

// Reads an option letter at `pos`: "(x)" in any case, a bare uppercase letter, or a bare
// lowercase letter that ends the sentence ("the answer is c.").
std::optional<char> read_letter(std::string_view t, std::size_t pos) {
  pos = skip(t, pos, " \t*");
  if (pos >= t.size()) return std::nullopt;
  if (t[pos] == '(' || t[pos] == '[') {
    const char close = t[pos] == '(' ? ')' : ']';
    std::size_t q = skip(t, pos + 1, " ");
    if (q < t.size() && is_alpha(t[q])) {
      const std::size_t r = skip(t, q + 1, " ");
      if (r < t.size() && t[r] == close) return t[q];
    }
    return std::nullopt;
  }
  if (!is_alpha(t[pos])) return std::nullopt;
  if (pos + 1 < t.size() && is_alnum(t[pos + 1])) return std::nullopt;
  const char c = t[pos];
  if (std::isupper(static_cast<unsigned char>(c))) return c;
  const std::size_t next = skip(t, pos + 1, " \t*");
  if (next >= t.size() || std::string_view(".,;:!?)]\r\n").find(t[next]) != std::string_view::npos)
    return c;
  return std::nullopt;
}

std::vector<LetterMatch> marker_matches(std::string_view t) {
  std::vector<LetterMatch> out;
  for (std::size_t p = 0; p + 6 <= t.size(); ++p) {
    if (!starts_with_icase(t, p, "answer")) continue;
    if (p > 0 && is_alpha(t[p - 1])) continue;
    std::size_t q = p + 6;
    q = skip(t, q, " \t*");
    if (q < t.size() && t[q] == ':') {
      ++q;
    } else if (starts_with_icase(t, q, "is") && (q + 2 >= t.size() || !is_alpha(t[q + 2]))) {
      q = skip(t, q + 2, " \t*");
      if (q < t.size() && t[q] == ':') ++q;
    } else {
      continue;
    }
    q = skip(t, q, " \t*");
    if (starts_with_icase(t, q, "option ")) q += 7;
    if (auto letter = read_letter(t, q)) out.push_back({p, *letter});
  }
  return out;
}

// A standalone option letter closing the text: "...\n\nB", "so (c).".
std::optional<LetterMatch> trailing_letter(std::string_view t) {
  std::size_t end = t.size();
  while (end > 0 && (is_space(t[end - 1]) || t[end - 1] == '.' || t[end - 1] == '!' ||
                     t[end - 1] == '*'))
    --end;
  if (end == 0) return std::nullopt;
  if (t[end - 1] == ')' || t[end - 1] == ']') {
    const char open = t[end - 1] == ')' ? '(' : '[';
    if (end >= 3 && is_alpha(t[end - 2]) && t[end - 3] == open &&
        (end == 3 || !is_alnum(t[end - 4])))
      return LetterMatch{end - 2, t[end - 2]};
    return std::nullopt;
  }
  const char c = t[end - 1];
  if (!std::isupper(static_cast<unsigned char>(c))) return std::nullopt;
  if (end >= 2 && is_alnum(t[end - 2])) return std::nullopt;
  return LetterMatch{end - 1, c};
}

CanonicalAnswer extract_option(std::string_view text, const Question& question) {
  std::optional<LetterMatch> last;
  for (const auto& m : marker_matches(text))
    if (!last || m.pos >= last->pos) last = m;
  if (auto trailing = trailing_letter(text); trailing && (!last || trailing->pos >= last->pos))
    last = trailing;
  if (!last) return CanonicalAnswer::unparseable();
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(last->letter)));
  for (const auto& [label, option_text] : question.options)
    if (label == up) return CanonicalAnswer::option(up);
  return CanonicalAnswer::unparseable();
}

struct Span {
  std::size_t begin;
  std::size_t end;
};

bool ends_with_at(std::string_view t, std::size_t end, std::string_view suffix) {
  return end >= suffix.size() && t.substr(end - suffix.size(), suffix.size()) == suffix;
}

// Number-like tokens, including a leading sign or currency symbol and a trailing percent.
std::vector<Span> number_tokens(std::string_view t, std::size_t from) {
  std::vector<Span> out;
  std::size_t i = from;
  while (i < t.size()) {
    const bool starts_digit = is_digit(t[i]);
    const bool starts_dot = t[i] == '.' && i + 1 < t.size() && is_digit(t[i + 1]);
    if ((!starts_digit && !starts_dot) || (i > 0 && (is_digit(t[i - 1]) || t[i - 1] == '.'))) {
      ++i;
      continue;
    }
    std::size_t e = i;
    while (e < t.size() && is_digit(t[e])) ++e;
    while (e + 3 < t.size() && t[e] == ',' && is_digit(t[e + 1]) && is_digit(t[e + 2]) &&
           is_digit(t[e + 3]) && (e + 4 >= t.size() || !is_digit(t[e + 4])))
      e += 4;
    bool decimal = false;
    if (e + 1 < t.size() && t[e] == '.' && is_digit(t[e + 1])) {
      decimal = true;
      ++e;
      while (e < t.size() && is_digit(t[e])) ++e;
    }
    if (!decimal) {
      std::size_t s = skip(t, e, " ");
      if (s < t.size() && t[s] == '/') {
        s = skip(t, s + 1, " ");
        if (s < t.size() && is_digit(t[s])) {
          while (s < t.size() && is_digit(t[s])) ++s;
          e = s;
        }
      }
    }
    if (e < t.size() && t[e] == '%') ++e;

    std::size_t b = i;
    std::size_t probe = b;
    bool currency = false;
    for (std::string_view sym : {std::string_view("$"), std::string_view("\xE2\x82\xAC"),
                                 std::string_view("\xC2\xA3")}) {
      if (ends_with_at(t, probe, sym)) {
        probe -= sym.size();
        currency = true;
        break;
      }
    }
    if (currency) b = probe;
    for (std::string_view minus : {std::string_view("-"), std::string_view("\xE2\x88\x92")}) {
      if (ends_with_at(t, b, minus)) {
        const std::size_t before = b - minus.size();
        if (before == 0 || !is_alnum(t[before - 1])) b = before;
        break;
      }
    }
    out.push_back({b, e});
    i = e;
  }
  return out;
}

std::optional<std::size_t> last_math_marker(std::string_view t) {
  std::optional<std::size_t> end;
  for (std::size_t p = 0; p < t.size(); ++p) {
    for (std::string_view m : {std::string_view("final answer"), std::string_view("answer is"),
                               std::string_view("answer:"), std::string_view("\\boxed")}) {
      if (starts_with_icase(t, p, m)) end = p + m.size();
    }
  }
  return end;
}

CanonicalAnswer extract_number(std::string_view text) {
  const auto marker = last_math_marker(text);
  const auto tokens = number_tokens(text, marker.value_or(0));
  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
    if (auto n = parse_number(text.substr(it->begin, it->end - it->begin)))
      return CanonicalAnswer::number(std::move(*n));
  }
  return CanonicalAnswer::unparseable();
}

}  // namespace

CanonicalAnswer extract_answer(std::string_view text, const Question& question) {
  return question.kind == TaskKind::MultipleChoice ? extract_option(text, question)
                                                   : extract_number(text);
}

Clustering cluster_responses(std::span<const ResponseSample> samples, const Question& question) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (samples[a].model_id != samples[b].model_id) return samples[a].model_id < samples[b].model_id;
    return samples[a].sample_index < samples[b].sample_index;
  });

  Clustering out;
  out.question_id = question.id;
  out.total = samples.size();
  for (std::size_t i : order) {
    const ResponseSample& s = samples[i];
    if (s.question_id != question.id)
      throw DataError("response " + s.model_id + "#" + std::to_string(s.sample_index) +
                      " belongs to question '" + s.question_id + "', not '" + question.id + "'");
    CanonicalAnswer answer = s.answer ? *s.answer : extract_answer(s.text, question);
    ResponseRef ref{s.model_id, s.sample_index};
    Cluster* target = nullptr;
    if (answer.is_parseable()) {
      for (auto& c : out.clusters) {
        if (equivalent(c.key, answer, question.kind)) {
          target = &c;
          break;
        }
      }
    }
    if (target) {
      target->members.push_back(std::move(ref));
    } else {
      out.clusters.push_back(Cluster{std::move(answer), {std::move(ref)}});
    }
  }
  return out;
}

}  // namespace consortium
