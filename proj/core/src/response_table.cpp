#include "consortium/response_table.hpp"

#include <algorithm>
#include <stdexcept>

#include "consortium/clustering.hpp"

namespace consortium {

namespace {

std::vector<ResponseSample> flatten(const QuestionResponses& q) {
  std::vector<ResponseSample> out;
  for (const auto& stratum : q.strata) out.insert(out.end(), stratum.begin(), stratum.end());
  return out;
}

// Clusters all responses of the question and records each response's cluster.
void intern(QuestionResponses& q, const std::vector<std::string>& model_ids) {
  const auto all = flatten(q);
  const Clustering clustering = cluster_responses(all, *q.question);
  q.cluster_ids.assign(q.strata.size(), {});
  for (std::size_t m = 0; m < q.strata.size(); ++m) q.cluster_ids[m].assign(q.strata[m].size(), 0);
  q.cluster_keys.clear();
  q.cluster_parseable.clear();
  q.cluster_correct.clear();
  for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
    const Cluster& cluster = clustering.clusters[c];
    for (const auto& ref : cluster.members) {
      const auto m = static_cast<std::size_t>(
          std::lower_bound(model_ids.begin(), model_ids.end(), ref.model_id) - model_ids.begin());
      q.cluster_ids[m][static_cast<std::size_t>(ref.sample_index)] = static_cast<std::uint32_t>(c);
    }
    q.cluster_keys.push_back(cluster.key);
    q.cluster_parseable.push_back(cluster.key.is_parseable() ? 1 : 0);
    q.cluster_correct.push_back(equivalent(cluster.key, q.question->gold, q.question->kind) ? 1 : 0);
  }
}

}  // namespace

ResponseTable ResponseTable::build(const RunRecord& run, const Dataset& dataset) {
  run.validate(dataset);
  ResponseTable t;
  t.model_ids_ = run.consortium.model_ids();
  t.per_model_ = static_cast<std::size_t>(run.budget.per_model);
  t.questions_.reserve(dataset.size());
  for (std::size_t qi = 0; qi < dataset.size(); ++qi) {
    QuestionResponses q;
    q.question = &dataset.questions[qi];
    const auto samples = run.question_samples(qi);
    for (std::size_t m = 0; m < t.model_ids_.size(); ++m) {
      std::vector<ResponseSample> stratum(samples.begin() + m * t.per_model_,
                                          samples.begin() + (m + 1) * t.per_model_);
      for (auto& s : stratum)
        if (!s.answer) s.answer = extract_answer(s.text, *q.question);
      q.strata.push_back(std::move(stratum));
    }
    intern(q, t.model_ids_);
    t.questions_.push_back(std::move(q));
  }
  return t;
}

ResponseTable ResponseTable::combine(std::span<const ResponseTable* const> single_model_tables,
                                     std::size_t per_model) {
  if (single_model_tables.empty()) throw std::invalid_argument("no tables to combine");
  std::vector<const ResponseTable*> tables(single_model_tables.begin(), single_model_tables.end());
  std::sort(tables.begin(), tables.end(), [](const ResponseTable* a, const ResponseTable* b) {
    return a->model_ids_.front() < b->model_ids_.front();
  });
  const std::size_t nq = tables.front()->questions_.size();
  ResponseTable t;
  t.per_model_ = per_model;
  for (const auto* s : tables) {
    if (s->model_ids_.size() != 1) throw std::invalid_argument("combine expects single-model tables");
    if (s->questions_.size() != nq) throw std::invalid_argument("tables cover different datasets");
    if (s->per_model_ < per_model)
      throw std::invalid_argument("table for " + s->model_ids_.front() + " has only " +
                                  std::to_string(s->per_model_) + " responses per question");
    if (!t.model_ids_.empty() && t.model_ids_.back() == s->model_ids_.front())
      throw std::invalid_argument("model " + s->model_ids_.front() + " appears twice");
    t.model_ids_.push_back(s->model_ids_.front());
  }
  t.questions_.reserve(nq);
  for (std::size_t qi = 0; qi < nq; ++qi) {
    QuestionResponses q;
    q.question = tables.front()->questions_[qi].question;
    for (const auto* s : tables) {
      if (s->questions_[qi].question->id != q.question->id)
        throw std::invalid_argument("tables cover different datasets");
      const auto& src = s->questions_[qi].strata.front();
      q.strata.emplace_back(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(per_model));
    }
    intern(q, t.model_ids_);
    t.questions_.push_back(std::move(q));
  }
  return t;
}

ResponseTable ResponseTable::truncated(std::size_t per_model) const {
  if (per_model == 0 || per_model > per_model_)
    throw std::invalid_argument("cannot truncate " + std::to_string(per_model_) +
                                " responses per model to " + std::to_string(per_model));
  ResponseTable t = *this;
  t.per_model_ = per_model;
  for (auto& q : t.questions_) {
    for (auto& s : q.strata) s.resize(per_model);
    for (auto& ids : q.cluster_ids) ids.resize(per_model);
  }
  return t;
}

std::vector<ResponseSample> ResponseTable::responses(std::size_t question_index) const {
  return flatten(questions_.at(question_index));
}

std::vector<VerdictRecord> ResponseTable::score() const {
  std::vector<VerdictRecord> out;
  out.reserve(questions_.size());
  for (const auto& q : questions_) {
    const auto all = flatten(q);
    out.push_back(score_question(cluster_responses(all, *q.question), q.question->gold,
                                 q.question->kind));
  }
  return out;
}

}  // namespace consortium
