#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "mxfr/errors.hpp"
#include "mxfr/evalx.hpp"
#include "mxfr/rng.hpp"

using namespace mxfr;

namespace {

// Plain recursion, the textbook definition; exponential, for short strings.
size_t naive_distance(const std::string& a, const std::string& b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  size_t skip_a = naive_distance(a.substr(1), b) + 1;
  size_t skip_b = naive_distance(a, b.substr(1)) + 1;
  size_t both = naive_distance(a.substr(1), b.substr(1)) +
                (a[0] == b[0] ? 0 : 1);
  return std::min({skip_a, skip_b, both});
}

std::vector<std::string> all_strings(size_t max_len) {
  std::vector<std::string> out = {""};
  std::vector<std::string> frontier = {""};
  for (size_t len = 1; len <= max_len; ++len) {
    std::vector<std::string> next;
    for (const std::string& s : frontier)
      for (char c : {'a', 'b', 'c'}) next.push_back(s + c);
    out.insert(out.end(), next.begin(), next.end());
    frontier = next;
  }
  return out;
}

std::string random_string(Rng& rng, size_t max_len) {
  std::string s;
  size_t len = rng.below(max_len + 1);
  for (size_t i = 0; i < len; ++i)
    s += static_cast<char>('a' + rng.below(3));
  return s;
}

}  // namespace

TEST_CASE("known distances") {
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("", "") == 0);
  CHECK(edit_distance("", "abc") == 3);
  CHECK(edit_distance("abc", "abc") == 0);
  CHECK(edit_distance("flaw", "lawn") == 2);
}

TEST_CASE("distance counts unicode scalars, not bytes") {
  // n vs ñ is one substitution even though ñ is two UTF-8 bytes.
  CHECK(edit_distance("sueño", "sueno") == 1);
  CHECK(edit_distance("soñar", "soñar") == 0);
}

TEST_CASE("dp distance equals exhaustive recursion on short strings") {
  std::vector<std::string> small = all_strings(4);
  for (const std::string& a : small)
    for (const std::string& b : small)
      REQUIRE(edit_distance(a, b) == naive_distance(a, b));
}

TEST_CASE("dp distance equals exhaustive recursion on sampled length-8 pairs") {
  Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    std::string a = random_string(rng, 8);
    std::string b = random_string(rng, 8);
    REQUIRE(edit_distance(a, b) == naive_distance(a, b));
  }
}

TEST_CASE("metric axioms on random pairs") {
  Rng rng(23);
  for (int i = 0; i < 10000; ++i) {
    std::string a = random_string(rng, 8);
    std::string b = random_string(rng, 8);
    std::string c = random_string(rng, 8);
    size_t ab = edit_distance(a, b);
    CHECK(ab == edit_distance(b, a));
    CHECK((ab == 0) == (a == b));
    CHECK(ab <= edit_distance(a, c) + edit_distance(c, b));
    CHECK(ab <= std::max(a.size(), b.size()));
  }
}

TEST_CASE("accuracy and report") {
  std::vector<std::string> preds = {"casa", "perro", "gato", "sueno"};
  std::vector<std::string> golds = {"casa", "perro", "gata", "sueño"};
  CHECK(accuracy(preds, golds) == doctest::Approx(0.5));

  EvalReport rep = evaluate(preds, golds);
  CHECK(rep.n == 4);
  CHECK(rep.accuracy == doctest::Approx(0.5));
  CHECK(rep.mean_edit_distance == doctest::Approx(0.5));
  CHECK(!rep.one_shot);
  CHECK(!rep.zero_shot);

  CHECK_THROWS_AS(accuracy({}, {}), DataError);
  CHECK_THROWS_AS(accuracy({"a"}, {"a", "b"}), DataError);
}

TEST_CASE("shot report splits classes and pools totals") {
  std::vector<ShotEvalSample> eval_samples;
  std::vector<std::string> preds;
  auto push = [&](ShotClass cls, const std::string& gold,
                  const std::string& pred) {
    ShotEvalSample e;
    e.sample.language = LanguageCode("xx");
    e.sample.lemma = "l";
    e.sample.tag = parse_tag(cls == ShotClass::OneShot ? "A" : "B");
    e.sample.form = gold;
    e.shot = cls;
    eval_samples.push_back(e);
    preds.push_back(pred);
  };
  push(ShotClass::OneShot, "abc", "abc");
  push(ShotClass::OneShot, "abcd", "abc");
  push(ShotClass::ZeroShot, "xy", "xy");

  EvalReport rep = shot_report(eval_samples, preds);
  CHECK(rep.n == 3);
  REQUIRE(rep.one_shot);
  REQUIRE(rep.zero_shot);
  CHECK(rep.one_shot->n == 2);
  CHECK(rep.one_shot->accuracy == doctest::Approx(0.5));
  CHECK(rep.zero_shot->n == 1);
  CHECK(rep.zero_shot->accuracy == doctest::Approx(1.0));
  CHECK(rep.accuracy == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("report formatting precision") {
  std::vector<std::string> preds = {"a", "b", "c"};
  std::vector<std::string> golds = {"a", "b", "x"};
  EvalReport rep = evaluate(preds, golds);
  std::string tsv = report_tsv(rep);
  CHECK(tsv.find("0.6667") != std::string::npos);
  CHECK(tsv.find("0.33") != std::string::npos);
  CHECK(!report_table(rep).empty());
}
