#include <doctest.h>

#include <set>
#include <sstream>

#include "consortium/answer.hpp"
#include "consortium/dataset.hpp"
#include "consortium/errors.hpp"
#include "support.hpp"

using namespace consortium;

TEST_CASE("parse_number surface forms") {
  auto exact = [](std::string_view s) {
    auto n = parse_number(s);
    REQUIRE(n);
    REQUIRE(n->exact);
    return n->exact->to_string();
  };
  CHECK(exact("1,024") == "1024");
  CHECK(exact("$1,024.00") == "1024");
  CHECK(exact("-$3.50") == "-7/2");
  CHECK(exact("3/4") == "3/4");
  CHECK(exact("6/8") == "3/4");
  CHECK(exact("25%") == "25");  // percent sign dropped, value kept
  CHECK(exact("€20") == "20");
  CHECK(exact("0.5") == "1/2");
  CHECK_FALSE(parse_number("abc"));
  CHECK_FALSE(parse_number("1 2"));
  CHECK_FALSE(parse_number(""));
  CHECK_FALSE(parse_number("1/0"));

  auto huge = parse_number("123456789012345678901234567890");
  REQUIRE(huge);
  CHECK_FALSE(huge->exact);
  CHECK(huge->value == doctest::Approx(1.2345678901234568e29));
}

TEST_CASE("equivalent") {
  const auto half = CanonicalAnswer::number(*parse_number("0.5"));
  const auto frac = CanonicalAnswer::number(*parse_number("1/2"));
  CHECK(equivalent(half, frac, TaskKind::Math));
  CHECK(equivalent(CanonicalAnswer::option('A'), CanonicalAnswer::option('a'), TaskKind::MultipleChoice));
  CHECK_FALSE(equivalent(CanonicalAnswer::option('A'), CanonicalAnswer::option('B'), TaskKind::MultipleChoice));
  CHECK_FALSE(equivalent(CanonicalAnswer::unparseable(), CanonicalAnswer::unparseable(), TaskKind::Math));
  CHECK_FALSE(equivalent(CanonicalAnswer::unparseable(), CanonicalAnswer::unparseable(),
                         TaskKind::MultipleChoice));

  // inexact values fall back to a relative tolerance
  NumberAnswer a{std::nullopt, 1e30, "1e30"}, b{std::nullopt, 1e30 * (1 + 1e-9), "x"},
      c{std::nullopt, 1.01e30, "y"};
  CHECK(equivalent(CanonicalAnswer::number(a), CanonicalAnswer::number(b), TaskKind::Math));
  CHECK_FALSE(equivalent(CanonicalAnswer::number(a), CanonicalAnswer::number(c), TaskKind::Math));
}

TEST_CASE("rational normalization") {
  CHECK(Rational(6, -8).to_string() == "-3/4");
  CHECK(Rational(10, 5).to_string() == "2");
  CHECK(Rational(0, 7) == Rational(0));
}

TEST_CASE("load_dataset keeps order") {
  const auto ds = testing::parse(
      R"({"id":"q1","prompt":"p","kind":"multiple_choice","options":[["A","x"],["B","y"]],"gold":"B"})"
      "\n"
      R"({"id":"q0","prompt":"p","kind":"multiple_choice","options":[["A","x"],["B","y"]],"gold":"A"})"
      "\n");
  REQUIRE(ds.size() == 2);
  CHECK(ds.questions[0].id == "q1");
  CHECK(ds.questions[1].id == "q0");
  CHECK(ds.at("q0").gold.key() == "A");
}

TEST_CASE("duplicate id names the id and line") {
  const std::string line = R"({"id":"q1","prompt":"p","kind":"math","gold":"3"})";
  const std::string other = R"({"id":"q2","prompt":"p","kind":"math","gold":"3"})";
  try {
    testing::parse(line + "\n" + other + "\n" + line + "\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("q1") != std::string::npos);
  }
}

TEST_CASE("math gold is canonicalized") {
  const auto ds = testing::parse(R"({"id":"m","prompt":"p","kind":"math","gold":"1,024"})");
  const auto* n = ds.questions[0].gold.as_number();
  REQUIRE(n);
  REQUIRE(n->exact);
  CHECK(*n->exact == Rational(1024));
}

TEST_CASE("invalid questions are rejected") {
  CHECK_THROWS_AS(testing::parse(R"({"id":"m","prompt":"p","kind":"math","gold":"seven"})"), DataError);
  CHECK_THROWS_AS(
      testing::parse(R"({"id":"x","prompt":"p","kind":"multiple_choice","options":[["A","a"],["B","b"]],"gold":"C"})"),
      DataError);
  CHECK_THROWS_AS(testing::parse(R"({"id":"x","prompt":"p","kind":"essay","gold":"1"})"), DataError);
  CHECK_THROWS_AS(testing::parse("{not json"), DataError);
  CHECK_THROWS_AS(testing::parse(""), DataError);
}

TEST_CASE("fixture datasets load and round-trip") {
  for (const char* name : {"mc12.jsonl", "math12.jsonl"}) {
    const auto ds = load_dataset(testing::fixture(name));
    CHECK(ds.size() == 12);
    std::ostringstream out;
    write_dataset(out, ds);
    std::istringstream in(out.str());
    const auto again = parse_dataset(in, ds.name);
    CHECK(content_hash(again) == content_hash(ds));
  }
  CHECK(load_dataset(testing::fixture("mc12.jsonl")).name == "mc12");
}

TEST_CASE("subsample") {
  std::string text;
  for (int i = 0; i < 500; ++i)
    text += R"({"id":"q)" + std::to_string(i) + R"(","prompt":"p","kind":"math","gold":")" + std::to_string(i) + "\"}\n";
  const auto big = testing::parse(text);

  const auto five = subsample(load_dataset(testing::fixture("math12.jsonl")), 12, 3);
  CHECK(content_hash(five) == content_hash(load_dataset(testing::fixture("math12.jsonl"))));

  const auto a = subsample(big, 200, 7), b = subsample(big, 200, 7);
  CHECK(content_hash(a) == content_hash(b));
  CHECK(a.size() == 200);
  // preserves file order, no duplicates
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ids.insert(a.questions[i].id);
    if (i) CHECK(std::stoi(a.questions[i - 1].id.substr(1)) < std::stoi(a.questions[i].id.substr(1)));
  }
  CHECK(ids.size() == 200);
  const auto c = subsample(big, 200, 8);
  CHECK(content_hash(c) != content_hash(a));

  const auto full0 = subsample(a, 200, 0), full1 = subsample(a, 200, 1);
  CHECK(content_hash(full0) == content_hash(full1));
}
