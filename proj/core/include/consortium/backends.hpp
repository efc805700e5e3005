#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "consortium/answer.hpp"
#include "consortium/dataset.hpp"

namespace consortium {

enum class BackendKind { Http, Replay, Synthetic };

std::string_view to_string(BackendKind kind);

struct ModelSpec {
  std::string id;
  BackendKind backend = BackendKind::Synthetic;

  // Http
  std::string endpoint;
  std::string auth_env_var;
  std::string remote_model;  // model name sent on the wire; defaults to id
  int max_concurrency = 4;
  double requests_per_minute = 0.0;  // 0 disables the ceiling
  int max_retries = 5;
  std::chrono::milliseconds backoff_initial{500};
  std::chrono::milliseconds backoff_cap{30000};
  std::chrono::seconds timeout{120};

  // Replay
  std::filesystem::path replay_log;

  // Synthetic
  std::filesystem::path profile;

  std::optional<double> price_in;   // USD per 1e6 input tokens
  std::optional<double> price_out;  // USD per 1e6 output tokens
  std::optional<double> mock_benchmark_score;

  void validate() const;
};

struct SamplingParams {
  double top_p = 0.9;
  double temperature = 0.5;
  int max_tokens = 1024;
  bool cot = true;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const SamplingParams&, const SamplingParams&) = default;
};

struct ResponseSample {
  std::string model_id;
  std::string question_id;
  int sample_index = 0;
  std::string text;
  std::optional<CanonicalAnswer> answer;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double latency_ms = 0.0;
};

/// Deterministic prompt for a question. Chain-of-thought prompts ask for step-by-step
/// reasoning; both variants fix the final-answer sentence the extractor looks for.
std::string build_prompt(const Question& question, const SamplingParams& params);

/// Whitespace word count scaled by 4/3 and rounded up; stands in for tokenizer counts
/// when a backend does not report usage.
std::int64_t estimate_tokens(std::string_view text);

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual const ModelSpec& spec() const = 0;
  /// One independent sample. Safe to call concurrently.
  virtual ResponseSample generate(const Question& question, const SamplingParams& params,
                                  int sample_index) = 0;
};

/// Categorical answer distributions for a synthetic model.
struct SyntheticProfile {
  /// question id -> (answer surface -> probability)
  std::map<std::string, std::map<std::string, double>> questions;
  /// Used for questions absent from `questions`: gold with this probability, otherwise a
  /// uniformly drawn wrong answer.
  std::optional<double> default_correct_prob;

  void validate() const;
};

SyntheticProfile load_synthetic_profile(const std::filesystem::path& path);
void save_synthetic_profile(const std::filesystem::path& path, const SyntheticProfile& profile);

/// Seeded stand-in for a model. Temperature 0 returns the modal answer (greedy decoding);
/// otherwise draws from the profile. Output text embeds the answer in the fixed final-answer
/// sentence.
class SyntheticBackend final : public ModelBackend {
 public:
  SyntheticBackend(ModelSpec spec, SyntheticProfile profile);

  const ModelSpec& spec() const override { return spec_; }
  ResponseSample generate(const Question& question, const SamplingParams& params,
                          int sample_index) override;

  /// The answer a given draw produces, without rendering text.
  std::string draw_answer(const Question& question, const SamplingParams& params,
                          int sample_index) const;

 private:
  ModelSpec spec_;
  SyntheticProfile profile_;
};

struct ReplayEntry {
  std::string text;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
};

/// Serves stored generations keyed by (model, question, sample index).
class ReplayBackend final : public ModelBackend {
 public:
  using Key = std::tuple<std::string, std::string, int>;

  ReplayBackend(ModelSpec spec, std::map<Key, ReplayEntry> entries);
  /// Loads a JSONL replay log, keeping only entries for `spec.id`.
  static std::unique_ptr<ReplayBackend> from_log(ModelSpec spec, const std::filesystem::path& log);

  const ModelSpec& spec() const override { return spec_; }
  ResponseSample generate(const Question& question, const SamplingParams& params,
                          int sample_index) override;

 private:
  ModelSpec spec_;
  std::map<Key, ReplayEntry> entries_;
};

/// Chat-completions client with a concurrency limit, a requests-per-minute ceiling and
/// bounded exponential backoff on retriable failures.
class HttpBackend final : public ModelBackend {
 public:
  explicit HttpBackend(ModelSpec spec);
  ~HttpBackend() override;

  const ModelSpec& spec() const override;
  ResponseSample generate(const Question& question, const SamplingParams& params,
                          int sample_index) override;

  /// Number of HTTP attempts made so far, including retries.
  std::size_t attempts() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Request body for one chat-completions call.
std::string chat_request_body(const ModelSpec& spec, const std::string& prompt,
                              const SamplingParams& params);

/// Classifies an HTTP status: 408, 409, 425, 429 and 5xx are retriable; other non-2xx are fatal.
bool is_retriable_status(int status);

std::unique_ptr<ModelBackend> make_backend(const ModelSpec& spec);

/// Parses the key-value models file: one `[model <id>]` section per model followed by
/// `key = value` lines. Relative paths resolve against the file's directory.
std::vector<ModelSpec> load_models_config(const std::filesystem::path& path);
std::vector<ModelSpec> parse_models_config(std::string_view text,
                                           const std::filesystem::path& base_dir = {});
std::string format_models_config(const std::vector<ModelSpec>& specs);

const ModelSpec& find_model(const std::vector<ModelSpec>& specs, std::string_view id);

}  // namespace consortium
