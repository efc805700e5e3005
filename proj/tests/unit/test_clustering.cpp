#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <tuple>
#include <numeric>
#include <random>

#include "consortium/clustering.hpp"
#include "consortium/errors.hpp"
#include "consortium/seeding.hpp"
#include "support.hpp"

using namespace consortium;

namespace {

Question mc() {
  Question q;
  q.id = "q";
  q.kind = TaskKind::MultipleChoice;
  for (char c : {'A', 'B', 'C', 'D'}) q.options.emplace_back(c, "x");
  q.gold = CanonicalAnswer::option('A');
  q.gold_text = "A";
  return q;
}

Question math() {
  Question q;
  q.id = "m";
  q.kind = TaskKind::Math;
  q.gold = CanonicalAnswer::number(*parse_number("1024"));
  q.gold_text = "1024";
  return q;
}

// Independent normalizer for hand-labelled answer strings: strips currency and grouping,
// drops a percent sign, and turns decimals into a reduced fraction "p" or "p/q".
std::string normalize(std::string s) {
  std::string t;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (c == '$' || c == ',') continue;
    if (c >= 0x80) continue;  // multi-byte currency signs
    if (c == '%') continue;
    t += static_cast<char>(c);
  }
  long long num = 0, den = 1;
  bool neg = false;
  std::size_t i = 0;
  if (t[i] == '-') neg = true, ++i;
  const auto slash = t.find('/');
  if (slash != std::string::npos) {
    num = std::stoll(t.substr(i, slash - i));
    den = std::stoll(t.substr(slash + 1));
  } else {
    for (; i < t.size() && t[i] != '.'; ++i) num = num * 10 + (t[i] - '0');
    if (i < t.size())
      for (++i; i < t.size(); ++i) num = num * 10 + (t[i] - '0'), den *= 10;
  }
  const long long g = std::gcd(num, den);
  if (g) num /= g, den /= g;
  if (neg && num) num = -num;
  return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

ResponseSample sample(const std::string& model, int index, const std::string& text,
                      const std::string& question = "q") {
  ResponseSample s;
  s.model_id = model;
  s.question_id = question;
  s.sample_index = index;
  s.text = text;
  return s;
}

}  // namespace

TEST_CASE("extract_answer examples") {
  CHECK(extract_answer("...Therefore, the answer is (B).", mc()).key() == "B");
  CHECK(extract_answer("I think A... no wait, the answer is C", mc()).key() == "C");
  const auto n = extract_answer("...the final answer is $1,024.00", math());
  REQUIRE(n.is_number());
  CHECK(n.key() == "1024");
  CHECK(equivalent(n, math().gold, TaskKind::Math));
}

TEST_CASE("extraction corpus") {
  std::ifstream in(testing::fixture("extraction.jsonl"));
  std::string line;
  int rows = 0, math_rows = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto kind = parse_task_kind(j.at("kind").get<std::string>());
    const std::string text = j.at("text");
    const auto got = extract_answer(text, kind == TaskKind::Math ? math() : mc());
    INFO(text);
    if (j.at("expected").is_null()) {
      CHECK_FALSE(got.is_parseable());
    } else {
      CHECK(got.key() == j.at("expected").get<std::string>());
      if (kind == TaskKind::Math) {
        ++math_rows;
        CHECK(normalize(j.at("surface").get<std::string>()) == got.key());
      }
    }
    ++rows;
  }
  CHECK(rows == 50);
  CHECK(math_rows > 20);
}

TEST_CASE("normalizer sanity") {
  CHECK(normalize("$1,024.00") == "1024");
  CHECK(normalize("25%") == "25");
  CHECK(normalize("-0.25") == "-1/4");
}

TEST_CASE("cluster_responses examples") {
  std::vector<ResponseSample> all;
  for (int i = 0; i < 40; ++i) all.push_back(sample("m", i, "The answer is (A)."));
  const auto one = cluster_responses(all, mc());
  REQUIRE(one.clusters.size() == 1);
  CHECK(one.clusters[0].count() == 40);
  CHECK(one.total == 40);

  const std::vector<ResponseSample> mixed = {sample("m", 0, "The answer is (A)."),
                                             sample("m", 1, "The answer is (B)."),
                                             sample("m", 2, "The answer is (A)."),
                                             sample("m", 3, "no idea")};
  const auto c = cluster_responses(mixed, mc());
  REQUIRE(c.clusters.size() == 3);
  CHECK(c.clusters[0].count() == 2);
  CHECK(c.clusters[1].count() == 1);
  CHECK(c.clusters[2].count() == 1);
  CHECK_FALSE(c.clusters[2].key.is_parseable());
}

TEST_CASE("canonical order is model then index") {
  const std::vector<ResponseSample> s = {sample("zeta", 0, "The answer is (B)."),
                                         sample("alpha", 1, "The answer is (C)."),
                                         sample("alpha", 0, "The answer is (D).")};
  const auto c = cluster_responses(s, mc());
  REQUIRE(c.clusters.size() == 3);
  CHECK(c.clusters[0].key.key() == "D");
  CHECK(c.clusters[1].key.key() == "C");
  CHECK(c.clusters[2].key.key() == "B");
}

TEST_CASE("sample from another question is rejected") {
  const std::vector<ResponseSample> s = {sample("m", 0, "The answer is (B).", "other")};
  CHECK_THROWS_AS(cluster_responses(s, mc()), DataError);
}

TEST_CASE("clustering matches an all-pairs union-find oracle") {
  Rng rng(31);
  const std::vector<std::string> forms = {"7", "7.0", "14/2", "$7", "8", "8.00", "1/2", "0.5",
                                          "50%", "3", "garbled", "1,000", "1000"};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ResponseSample> samples;
    for (int i = 0; i < 200; ++i) {
      const auto& f = forms[rng() % forms.size()];
      samples.push_back(sample("m" + std::to_string(i % 3), i / 3,
                               f == "garbled" ? "I give up." : "The final answer is " + f + ".", "m"));
    }
    const auto c = cluster_responses(samples, math());

    // oracle over canonical order
    auto ordered = samples;
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
      return std::tie(a.model_id, a.sample_index) < std::tie(b.model_id, b.sample_index);
    });
    std::vector<CanonicalAnswer> ans;
    for (const auto& s : ordered) ans.push_back(extract_answer(s.text, math()));
    std::vector<std::size_t> parent(ans.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
      return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    for (std::size_t i = 0; i < ans.size(); ++i)
      for (std::size_t j = i + 1; j < ans.size(); ++j)
        if (equivalent(ans[i], ans[j], TaskKind::Math)) parent[find(j)] = find(i);

    // map each response to its cluster index and compare the partitions
    std::map<std::pair<std::string, int>, std::size_t> cluster_of;
    for (std::size_t k = 0; k < c.clusters.size(); ++k)
      for (const auto& r : c.clusters[k].members) cluster_of[{r.model_id, r.sample_index}] = k;
    REQUIRE(cluster_of.size() == ordered.size());
    for (std::size_t i = 0; i < ordered.size(); ++i)
      for (std::size_t j = i + 1; j < ordered.size(); ++j) {
        const bool same_oracle = find(i) == find(j);
        const bool same = cluster_of[{ordered[i].model_id, ordered[i].sample_index}] ==
                          cluster_of[{ordered[j].model_id, ordered[j].sample_index}];
        if (same_oracle != same) FAIL("partition differs at " << i << "," << j);
      }
  }
}
