#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "mxfr/encoding.hpp"
#include "mxfr/errors.hpp"
#include "mxfr/rng.hpp"
#include "support/synthlang.hpp"

using namespace mxfr;

namespace {

std::vector<Sample> mixed_corpus() {
  std::vector<Sample> all = synth::language_a(6, 1);
  std::vector<Sample> b = synth::language_b(6, 2);
  all.insert(all.end(), b.begin(), b.end());
  return all;
}

}  // namespace

TEST_CASE("vocabulary is deterministic under sample order") {
  std::vector<Sample> samples = mixed_corpus();
  SymbolVocab v1 = SymbolVocab::build(samples);
  std::reverse(samples.begin(), samples.end());
  SymbolVocab v2 = SymbolVocab::build(samples);
  CHECK(v1 == v2);
}

TEST_CASE("special symbol ids") {
  SymbolVocab vocab = SymbolVocab::build(mixed_corpus());
  CHECK(SymbolVocab::kBow == 0);
  CHECK(SymbolVocab::kEow == 1);
  CHECK(SymbolVocab::kPad == 2);
  CHECK(vocab.input_symbol(0).role == SymbolRole::Special);
  CHECK(vocab.input_symbol(1).role == SymbolRole::Special);
  CHECK(vocab.input_symbol(2).role == SymbolRole::Special);
  CHECK(vocab.output_symbol(0).role == SymbolRole::Special);
}

TEST_CASE("input layout and round trip") {
  std::vector<Sample> samples = mixed_corpus();
  SymbolVocab vocab = SymbolVocab::build(samples);
  for (const Sample& s : samples) {
    std::vector<int> ids = encode_input(s, vocab);
    REQUIRE(ids.size() >= 4);
    CHECK(ids.front() == SymbolVocab::kBow);
    CHECK(ids.back() == SymbolVocab::kEow);
    CHECK(vocab.input_symbol(ids[1]).role == SymbolRole::Language);
    CHECK(vocab.input_symbol(ids[1]).text == s.language.code);
    for (size_t i = 0; i < s.tag.subtags.size(); ++i)
      CHECK(vocab.input_symbol(ids[2 + i]).text == s.tag.subtags[i]);

    Sample back = decode_input(ids, vocab);
    CHECK(back.language.code == s.language.code);
    CHECK(back.lemma == s.lemma);
    CHECK(back.tag == s.tag);
  }
}

TEST_CASE("target layout") {
  std::vector<Sample> samples = mixed_corpus();
  SymbolVocab vocab = SymbolVocab::build(samples);
  const Sample& s = samples[0];
  std::vector<int> ids = encode_target(s.form, vocab);
  CHECK(ids.front() == SymbolVocab::kBow);
  CHECK(ids.back() == SymbolVocab::kEow);
  std::string decoded = decode_output(
      std::vector<int>(ids.begin() + 1, ids.end() - 1), vocab);
  CHECK(decoded == s.form);
}

TEST_CASE("unknown symbols are an error") {
  SymbolVocab vocab = SymbolVocab::build(synth::language_a(4, 1));
  Sample alien;
  alien.language = LanguageCode("zz");
  alien.lemma = "pata";
  alien.tag = parse_tag("N;NOM;SG");
  alien.form = "patan";
  CHECK_THROWS_AS(encode_input(alien, vocab), DataError);

  Sample bad_char;
  bad_char.language = LanguageCode("aa");
  bad_char.lemma = "qqqq";
  bad_char.tag = parse_tag("N;NOM;SG");
  bad_char.form = "qqqqn";
  CHECK_THROWS_AS(encode_input(bad_char, vocab), DataError);
}

TEST_CASE("vocabulary serialization round trip") {
  SymbolVocab vocab = SymbolVocab::build(mixed_corpus());
  std::stringstream buf;
  vocab.write(buf);
  SymbolVocab back = SymbolVocab::read(buf);
  CHECK(vocab == back);
}

TEST_CASE("batching covers every sample exactly once") {
  std::vector<Sample> samples = mixed_corpus();
  SymbolVocab vocab = SymbolVocab::build(samples);
  std::vector<EncodedSample> encoded;
  for (const Sample& s : samples) encoded.push_back(encode_sample(s, vocab));

  std::vector<Batch> batches = make_batches(encoded, 20, 5, true);
  size_t total = 0;
  std::multiset<std::string> seen, expected;
  for (const EncodedSample& e : encoded) {
    std::string key;
    for (int id : e.input_ids) key += std::to_string(id) + ",";
    expected.insert(key);
  }
  for (const Batch& b : batches) {
    CHECK(b.size() <= 20);
    total += b.size();
    for (size_t r = 0; r < b.size(); ++r) {
      std::string key;
      for (int id : batch_row(b, r).input_ids)
        key += std::to_string(id) + ",";
      seen.insert(key);
    }
  }
  CHECK(total == encoded.size());
  CHECK(seen == expected);
}

TEST_CASE("batch shuffling is seed-deterministic") {
  std::vector<Sample> samples = mixed_corpus();
  SymbolVocab vocab = SymbolVocab::build(samples);
  std::vector<EncodedSample> encoded;
  for (const Sample& s : samples) encoded.push_back(encode_sample(s, vocab));

  std::vector<Batch> b1 = make_batches(encoded, 16, 9, true);
  std::vector<Batch> b2 = make_batches(encoded, 16, 9, true);
  std::vector<Batch> b3 = make_batches(encoded, 16, 10, true);
  REQUIRE(b1.size() == b2.size());
  bool same = true, differs = false;
  for (size_t i = 0; i < b1.size(); ++i) {
    if (b1[i].input_matrix != b2[i].input_matrix) same = false;
    if (b1[i].input_matrix != b3[i].input_matrix) differs = true;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("padding and masks agree") {
  std::vector<Sample> samples = mixed_corpus();
  SymbolVocab vocab = SymbolVocab::build(samples);
  std::vector<EncodedSample> encoded;
  for (const Sample& s : samples) encoded.push_back(encode_sample(s, vocab));
  for (const Batch& b : make_batches(encoded, 8, 3, false)) {
    for (size_t r = 0; r < b.size(); ++r) {
      REQUIRE(b.input_matrix[r].size() == b.input_mask[r].size());
      for (size_t c = 0; c < b.input_matrix[r].size(); ++c) {
        if (!b.input_mask[r][c])
          CHECK(b.input_matrix[r][c] == SymbolVocab::kPad);
        else
          CHECK(b.input_matrix[r][c] != SymbolVocab::kPad);
      }
    }
  }
}
