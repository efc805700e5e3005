#include "consortium/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "consortium/errors.hpp"
#include "consortium/seeding.hpp"
#include "json_io.hpp"

namespace consortium {

using detail::json;

std::vector<char> Question::labels() const {
  std::vector<char> out;
  out.reserve(options.size());
  for (const auto& [label, text] : options) out.push_back(label);
  return out;
}

const Question& Dataset::at(std::string_view question_id) const {
  for (const auto& q : questions)
    if (q.id == question_id) return q;
  throw DataError("dataset '" + name + "' has no question '" + std::string(question_id) + "'");
}

namespace {

void validate_question(const Question& q, std::size_t line) {
  if (q.id.empty()) throw DataError("question id is empty", line);
  if (q.kind == TaskKind::MultipleChoice) {
    if (q.options.size() < 2)
      throw DataError("question '" + q.id + "' needs at least two options", line);
    for (std::size_t i = 0; i < q.options.size(); ++i) {
      const char expected = static_cast<char>('A' + i);
      if (i >= 26 || q.options[i].first != expected)
        throw DataError("question '" + q.id + "' options must be labelled A, B, C, ... in order",
                        line);
    }
    if (!q.gold.is_option() ||
        q.gold.as_option()->label >= static_cast<char>('A' + q.options.size()))
      throw DataError("question '" + q.id + "' gold is not one of its options", line);
  } else {
    if (!q.options.empty()) throw DataError("math question '" + q.id + "' has options", line);
    if (!q.gold.is_number()) throw DataError("question '" + q.id + "' gold is not a number", line);
  }
}

Question question_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw DataError("expected a JSON object", line);
  Question q;
  q.id = detail::field<std::string>(j, "id", line);
  q.prompt = detail::field<std::string>(j, "prompt", line);
  q.kind = parse_task_kind(detail::field<std::string>(j, "kind", line));
  if (auto it = j.find("options"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw DataError("field 'options' must be an array", line);
    for (const auto& opt : *it) {
      if (!opt.is_array() || opt.size() != 2 || !opt[0].is_string() || !opt[1].is_string())
        throw DataError("each option must be a [label, text] pair", line);
      const auto label = opt[0].get<std::string>();
      if (label.size() != 1 || label[0] < 'A' || label[0] > 'Z')
        throw DataError("option label '" + label + "' is not an uppercase letter", line);
      q.options.emplace_back(label[0], opt[1].get<std::string>());
    }
  }
  q.gold_text = detail::field<std::string>(j, "gold", line);
  const auto labels = q.labels();
  try {
    q.gold = parse_gold(q.gold_text, q.kind, labels);
  } catch (const DataError& e) {
    throw DataError("question '" + q.id + "': " + e.what(), line);
  }
  validate_question(q, line);
  return q;
}

json question_to_json(const Question& q) {
  json options = json::array();
  for (const auto& [label, text] : q.options) options.push_back({std::string(1, label), text});
  return {{"id", q.id},
          {"prompt", q.prompt},
          {"kind", std::string(to_string(q.kind))},
          {"options", options},
          {"gold", q.gold_text.empty() ? q.gold.surface() : q.gold_text}};
}

}  // namespace

void validate(const Dataset& dataset) {
  if (dataset.questions.empty()) throw DataError("dataset '" + dataset.name + "' is empty");
  std::set<std::string_view> seen;
  for (const auto& q : dataset.questions) {
    validate_question(q, 0);
    if (!seen.insert(q.id).second) throw DataError("duplicate question id '" + q.id + "'");
  }
}

Dataset parse_dataset(std::istream& in, std::string name) {
  Dataset ds;
  ds.name = std::move(name);
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    Question q = question_from_json(j, line_no);
    if (!seen.insert(q.id).second) throw DataError("duplicate question id '" + q.id + "'", line_no);
    ds.questions.push_back(std::move(q));
  }
  if (ds.questions.empty()) throw DataError("dataset '" + ds.name + "' is empty");
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return parse_dataset(in, path.stem().string());
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& q : dataset.questions) out << question_to_json(q).dump() << '\n';
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset " + path.string());
  write_dataset(out, dataset);
}

Dataset subsample(const Dataset& dataset, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("subsample size must be positive");
  if (n > dataset.questions.size())
    throw std::invalid_argument("cannot draw " + std::to_string(n) + " questions from " +
                                std::to_string(dataset.questions.size()));
  std::vector<std::size_t> idx(dataset.questions.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  Rng rng(derive_seed(seed, "subsample"));
  // std::sample is stable for forward iterators, so file order is preserved.
  std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), n, rng);
  Dataset out;
  out.name = dataset.name;
  for (auto i : chosen) out.questions.push_back(dataset.questions[i]);
  return out;
}

std::string content_hash(const Dataset& dataset) {
  std::ostringstream os;
  write_dataset(os, dataset);
  return hex64(fnv1a64(os.str()));
}

}  // namespace consortium
