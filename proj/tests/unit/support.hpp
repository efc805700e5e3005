#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <functional>
#include <string>
#include <vector>

#include "consortium/dataset.hpp"
#include "consortium/orchestrator.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(CONSORTIUM_FIXTURES) / name;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("consortium-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline consortium::Dataset parse(const std::string& jsonl, const std::string& name = "inline") {
  std::istringstream in(jsonl);
  return consortium::parse_dataset(in, name);
}

/// `n` four-option questions q00, q01, ... with gold A.
inline consortium::Dataset mc_dataset(std::size_t n, const std::string& name = "mc") {
  std::string text;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = (i < 10 ? "q0" : "q") + std::to_string(i);
    text += R"({"id":")" + id +
            R"(","prompt":"p","kind":"multiple_choice","options":[["A","a"],["B","b"],["C","c"],["D","d"]],"gold":"A"})" "\n";
  }
  return parse(text, name);
}

/// Complete run whose response text for (model, question index, sample index) is `answer`'s
/// letter in the fixed final-answer sentence, or a non-answer when it returns '?'.
inline consortium::RunRecord make_run(const consortium::Dataset& ds, std::vector<std::string> models,
                                      int per_model,
                                      const std::function<char(const std::string&, std::size_t, int)>& answer) {
  consortium::RunRecord run;
  run.consortium = consortium::Consortium(std::move(models));
  run.budget = consortium::plan_budget(run.consortium, per_model * static_cast<int>(run.consortium.size()));
  run.dataset_name = ds.name;
  run.dataset_hash = consortium::content_hash(ds);
  run.run_id = "test";
  for (std::size_t q = 0; q < ds.size(); ++q)
    for (const auto& m : run.consortium.model_ids())
      for (int k = 0; k < per_model; ++k) {
        consortium::ResponseSample s;
        s.model_id = m;
        s.question_id = ds.questions[q].id;
        s.sample_index = k;
        const char a = answer(m, q, k);
        s.text = a == '?' ? "No idea." : std::string("Therefore, the answer is (") + a + ").";
        s.tokens_in = 10;
        s.tokens_out = 5;
        run.samples.push_back(s);
      }
  return run;
}

}  // namespace testing
