#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "consortium/answer.hpp"

namespace consortium {

struct Question {
  std::string id;
  std::string prompt;
  TaskKind kind = TaskKind::MultipleChoice;
  /// (label, text) pairs, labels 'A', 'B', ... in order. Empty for math questions.
  std::vector<std::pair<char, std::string>> options;
  CanonicalAnswer gold;
  /// Gold exactly as it appeared in the source file.
  std::string gold_text;

  std::vector<char> labels() const;
};

struct Dataset {
  std::string name;
  std::vector<Question> questions;

  const Question& at(std::string_view question_id) const;
  std::size_t size() const noexcept { return questions.size(); }
};

/// Checks every question and dataset invariant, throwing DataError on the first violation.
void validate(const Dataset& dataset);

/// Reads a JSONL dataset. The dataset name defaults to the file stem.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::istream& in, std::string name);

void write_dataset(std::ostream& out, const Dataset& dataset);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Uniform subset of `n` questions without replacement, preserving file order.
Dataset subsample(const Dataset& dataset, std::size_t n, std::uint64_t seed);

/// Hex digest of the serialized dataset; identifies the dataset in run manifests.
std::string content_hash(const Dataset& dataset);

}  // namespace consortium
