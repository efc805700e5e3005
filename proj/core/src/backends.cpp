#include "consortium/backends.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "consortium/errors.hpp"
#include "consortium/seeding.hpp"
#include "json_io.hpp"

namespace consortium {

using detail::json;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Http: return "http";
    case BackendKind::Replay: return "replay";
    case BackendKind::Synthetic: return "synthetic";
  }
  return "unknown";
}

void ModelSpec::validate() const {
  if (id.empty()) throw ConfigError("model id is empty");
  if (id.find_first_of(" \t,+[]") != std::string::npos)
    throw ConfigError("model id '" + id + "' contains a reserved character");
  if (price_in && *price_in < 0) throw ConfigError("model '" + id + "': price_in is negative");
  if (price_out && *price_out < 0) throw ConfigError("model '" + id + "': price_out is negative");
  if (mock_benchmark_score && (*mock_benchmark_score < 0 || *mock_benchmark_score > 100))
    throw ConfigError("model '" + id + "': mock_benchmark_score must be within [0, 100]");
  if (max_concurrency < 1) throw ConfigError("model '" + id + "': max_concurrency must be >= 1");
  if (requests_per_minute < 0) throw ConfigError("model '" + id + "': rpm is negative");
  if (max_retries < 0) throw ConfigError("model '" + id + "': max_retries is negative");
  switch (backend) {
    case BackendKind::Http:
      if (endpoint.empty()) throw ConfigError("model '" + id + "': http backend needs an endpoint");
      break;
    case BackendKind::Replay:
      if (replay_log.empty()) throw ConfigError("model '" + id + "': replay backend needs a log");
      break;
    case BackendKind::Synthetic:
      if (profile.empty()) throw ConfigError("model '" + id + "': synthetic backend needs a profile");
      break;
  }
}

void SamplingParams::validate() const {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
}

namespace {

constexpr std::string_view kMcFinal = "Therefore, the answer is (X).";
constexpr std::string_view kMathFinal = "Therefore, the final answer is N.";

}  // namespace

std::string build_prompt(const Question& question, const SamplingParams& params) {
  std::ostringstream os;
  os << question.prompt << "\n";
  if (question.kind == TaskKind::MultipleChoice) {
    os << "\n";
    for (const auto& [label, text] : question.options) os << label << ". " << text << "\n";
  }
  os << "\n";
  if (params.cot) os << "Let's think step by step. ";
  else os << "Answer directly without explanation. ";
  if (question.kind == TaskKind::MultipleChoice) {
    os << "End your response with the sentence \"" << kMcFinal
       << "\" where X is the letter of the correct option.";
  } else {
    os << "End your response with the sentence \"" << kMathFinal
       << "\" where N is the final numeric answer.";
  }
  return os.str();
}

std::int64_t estimate_tokens(std::string_view text) {
  std::int64_t words = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return (words * 4 + 2) / 3;
}

// ---- synthetic -------------------------------------------------------------

void SyntheticProfile::validate() const {
  if (default_correct_prob && (*default_correct_prob < 0 || *default_correct_prob > 1))
    throw ConfigError("default_correct_prob must be within [0, 1]");
  for (const auto& [qid, dist] : questions) {
    if (dist.empty()) throw ConfigError("profile for '" + qid + "' is empty");
    double sum = 0;
    for (const auto& [answer, p] : dist) {
      if (p < 0) throw ConfigError("profile for '" + qid + "' has a negative probability");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      throw ConfigError("profile for '" + qid + "' sums to " + std::to_string(sum) + ", not 1");
  }
}

SyntheticProfile load_synthetic_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synthetic profile " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("synthetic profile " + path.string() + ": " + e.what());
  }
  SyntheticProfile p;
  try {
    if (j.contains("default_correct_prob") && !j["default_correct_prob"].is_null())
      p.default_correct_prob = j["default_correct_prob"].get<double>();
    if (j.contains("questions"))
      p.questions = j["questions"].get<std::map<std::string, std::map<std::string, double>>>();
  } catch (const json::exception& e) {
    throw ConfigError("synthetic profile " + path.string() + ": " + e.what());
  }
  p.validate();
  return p;
}

void save_synthetic_profile(const std::filesystem::path& path, const SyntheticProfile& profile) {
  json j;
  j["default_correct_prob"] =
      profile.default_correct_prob ? json(*profile.default_correct_prob) : json(nullptr);
  j["questions"] = profile.questions;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write synthetic profile " + path.string());
  out << j.dump(1) << '\n';
}

SyntheticBackend::SyntheticBackend(ModelSpec spec, SyntheticProfile profile)
    : spec_(std::move(spec)), profile_(std::move(profile)) {
  profile_.validate();
}

namespace {

std::uint64_t draw_seed(const std::string& model_id, const std::string& question_id,
                        std::uint64_t seed, int sample_index) {
  std::uint64_t h = fnv1a64(model_id);
  h = fnv1a64(question_id, mix64(h));
  return derive_seed(mix64(h ^ seed), static_cast<std::uint64_t>(sample_index));
}

std::string wrong_math_answer(const Question& q, int offset) {
  const auto* n = q.gold.as_number();
  if (n && n->exact) {
    const Rational& g = *n->exact;
    return Rational(g.numerator() + offset * g.denominator(), g.denominator()).to_string();
  }
  std::ostringstream os;
  os << (n ? n->value : 0.0) + offset;
  return os.str();
}

}  // namespace

std::string SyntheticBackend::draw_answer(const Question& question, const SamplingParams& params,
                                          int sample_index) const {
  const bool greedy = params.temperature == 0.0;
  Rng rng(draw_seed(spec_.id, question.id, params.seed, sample_index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (auto it = profile_.questions.find(question.id); it != profile_.questions.end()) {
    const auto& dist = it->second;
    if (greedy) {
      auto best = dist.begin();
      for (auto d = dist.begin(); d != dist.end(); ++d)
        if (d->second > best->second) best = d;
      return best->first;
    }
    const double u = unit(rng);
    double acc = 0.0;
    for (const auto& [answer, p] : dist) {
      acc += p;
      if (u < acc) return answer;
    }
    // Rounding left u above the final cumulative sum; take the last answer with mass.
    for (auto d = dist.rbegin(); d != dist.rend(); ++d)
      if (d->second > 0) return d->first;
    return dist.rbegin()->first;
  }

  if (!profile_.default_correct_prob)
    throw BackendError("synthetic model '" + spec_.id + "' has no profile for question '" +
                           question.id + "' and no default",
                       false);
  const double p = *profile_.default_correct_prob;
  const std::string gold = question.gold.key();
  std::vector<std::string> wrong;
  if (question.kind == TaskKind::MultipleChoice) {
    for (const auto& [label, text] : question.options)
      if (std::string(1, label) != gold) wrong.emplace_back(1, label);
  } else {
    for (int k = 1; k <= 5; ++k) {
      wrong.push_back(wrong_math_answer(question, k));
      wrong.push_back(wrong_math_answer(question, -k));
    }
  }
  if (greedy) {
    const double per_wrong = wrong.empty() ? 0.0 : (1.0 - p) / static_cast<double>(wrong.size());
    return p >= per_wrong || wrong.empty() ? gold : wrong.front();
  }
  if (unit(rng) < p || wrong.empty()) return gold;
  std::uniform_int_distribution<std::size_t> pick(0, wrong.size() - 1);
  return wrong[pick(rng)];
}

ResponseSample SyntheticBackend::generate(const Question& question, const SamplingParams& params,
                                          int sample_index) {
  const std::string answer = draw_answer(question, params, sample_index);
  ResponseSample s;
  s.model_id = spec_.id;
  s.question_id = question.id;
  s.sample_index = sample_index;
  std::ostringstream os;
  if (params.cot) os << "Let me work through this step by step.\n";
  if (question.kind == TaskKind::MultipleChoice) os << "Therefore, the answer is (" << answer << ").";
  else os << "Therefore, the final answer is " << answer << ".";
  s.text = os.str();
  s.tokens_in = estimate_tokens(build_prompt(question, params));
  s.tokens_out = estimate_tokens(s.text);
  return s;
}

// ---- replay ----------------------------------------------------------------

ReplayBackend::ReplayBackend(ModelSpec spec, std::map<Key, ReplayEntry> entries)
    : spec_(std::move(spec)), entries_(std::move(entries)) {}

std::unique_ptr<ReplayBackend> ReplayBackend::from_log(ModelSpec spec,
                                                       const std::filesystem::path& log) {
  std::ifstream in(log);
  if (!in) throw ConfigError("cannot open replay log " + log.string());
  std::map<Key, ReplayEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("replay log " + log.string() + ": " + e.what(), line_no);
    }
    if (detail::field<std::string>(j, "model_id", line_no) != spec.id) continue;
    ReplayEntry e;
    e.text = detail::field<std::string>(j, "text", line_no);
    e.tokens_in = j.value("tokens_in", std::int64_t{-1});
    e.tokens_out = j.value("tokens_out", estimate_tokens(e.text));
    Key key{spec.id, detail::field<std::string>(j, "question_id", line_no),
            detail::field<int>(j, "sample_index", line_no)};
    if (!entries.emplace(std::move(key), std::move(e)).second)
      throw DataError("replay log " + log.string() + " repeats an entry", line_no);
  }
  return std::make_unique<ReplayBackend>(std::move(spec), std::move(entries));
}

ResponseSample ReplayBackend::generate(const Question& question, const SamplingParams& params,
                                       int sample_index) {
  auto it = entries_.find(Key{spec_.id, question.id, sample_index});
  if (it == entries_.end())
    throw BackendError("replay log has no entry for (" + spec_.id + ", " + question.id + ", " +
                           std::to_string(sample_index) + ")",
                       false);
  ResponseSample s;
  s.model_id = spec_.id;
  s.question_id = question.id;
  s.sample_index = sample_index;
  s.text = it->second.text;
  s.tokens_in = it->second.tokens_in >= 0 ? it->second.tokens_in
                                          : estimate_tokens(build_prompt(question, params));
  s.tokens_out = it->second.tokens_out;
  return s;
}

// ---- factory -----------------------------------------------------------------

std::unique_ptr<ModelBackend> make_backend(const ModelSpec& spec) {
  spec.validate();
  switch (spec.backend) {
    case BackendKind::Http: return std::make_unique<HttpBackend>(spec);
    case BackendKind::Replay: return ReplayBackend::from_log(spec, spec.replay_log);
    case BackendKind::Synthetic:
      return std::make_unique<SyntheticBackend>(spec, load_synthetic_profile(spec.profile));
  }
  throw ConfigError("unknown backend");
}

const ModelSpec& find_model(const std::vector<ModelSpec>& specs, std::string_view id) {
  for (const auto& s : specs)
    if (s.id == id) return s;
  throw ConfigError("unknown model id '" + std::string(id) + "'");
}

// ---- JSON ----------------------------------------------------------------------

namespace detail {

json to_json(const SamplingParams& p) {
  return {{"top_p", p.top_p},       {"temperature", p.temperature}, {"max_tokens", p.max_tokens},
          {"cot", p.cot},           {"seed", p.seed}};
}

SamplingParams params_from_json(const json& j) {
  SamplingParams p;
  p.top_p = field<double>(j, "top_p", 0);
  p.temperature = field<double>(j, "temperature", 0);
  p.max_tokens = field<int>(j, "max_tokens", 0);
  p.cot = field<bool>(j, "cot", 0);
  p.seed = field<std::uint64_t>(j, "seed", 0);
  return p;
}

json to_json(const ResponseSample& s) {
  return {{"model_id", s.model_id},   {"question_id", s.question_id},
          {"sample_index", s.sample_index}, {"text", s.text},
          {"tokens_in", s.tokens_in}, {"tokens_out", s.tokens_out},
          {"latency_ms", s.latency_ms}};
}

ResponseSample sample_from_json(const json& j, std::size_t line) {
  ResponseSample s;
  s.model_id = field<std::string>(j, "model_id", line);
  s.question_id = field<std::string>(j, "question_id", line);
  s.sample_index = field<int>(j, "sample_index", line);
  s.text = field<std::string>(j, "text", line);
  s.tokens_in = field<std::int64_t>(j, "tokens_in", line);
  s.tokens_out = field<std::int64_t>(j, "tokens_out", line);
  s.latency_ms = j.value("latency_ms", 0.0);
  if (s.tokens_in < 0 || s.tokens_out < 0) throw DataError("negative token count", line);
  if (s.sample_index < 0) throw DataError("negative sample_index", line);
  return s;
}

}  // namespace detail

}  // namespace consortium
