#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mxfr {

// Short lowercase language identifier, e.g. "es", "pt", "sme".
struct LanguageCode {
  std::string code;

  LanguageCode() = default;
  explicit LanguageCode(std::string c);  // validates [a-z]{2,4}

  bool operator==(const LanguageCode& o) const { return code == o.code; }
  auto operator<=>(const LanguageCode& o) const { return code <=> o.code; }
};

// Ordered sequence of universal subtags, e.g. [V, IND, PRS, 1, SG].
struct MorphTag {
  std::vector<std::string> subtags;

  // Canonical ';'-joined form, used as a map key and for display.
  std::string key() const;

  bool operator==(const MorphTag& o) const { return subtags == o.subtags; }
  auto operator<=>(const MorphTag& o) const { return subtags <=> o.subtags; }
};

// One (language, lemma, tag, inflected form) record.
struct Sample {
  LanguageCode language;
  std::string lemma;
  MorphTag tag;
  std::string form;
};

struct Paradigm {
  LanguageCode language;
  std::string lemma;
  std::map<MorphTag, std::string> entries;
};

struct SplitMeta {
  std::string source_language;  // empty in the monolingual case
  std::string target_language;
  size_t n_s = 0;
  size_t n_t = 0;
  size_t dev_size = 0;
  size_t test_size = 0;
  uint64_t seed = 0;
};

struct DatasetSplit {
  std::vector<Sample> train;  // mixed source + target
  std::vector<Sample> dev;    // target only
  std::vector<Sample> test;   // target only
  SplitMeta meta;
};

// Random bijection over source-language characters and subtags. The two
// sub-domains are permuted separately: characters map to characters and
// subtags to subtags, so ciphered word forms stay representable as strings.
// Language codes are never in the domain.
struct CipherMap {
  std::map<char32_t, char32_t> char_map;
  std::map<std::string, std::string> subtag_map;
  uint64_t seed = 0;

  CipherMap inverse() const;
};

enum class ShotClass { OneShot, ZeroShot };

struct ShotEvalSample {
  Sample sample;
  ShotClass shot = ShotClass::ZeroShot;
};

struct ShotSplit {
  std::vector<Sample> train;  // exactly one sample per seen tag
  std::set<MorphTag> seen_tags;
  std::set<MorphTag> unseen_tags;
  std::vector<ShotEvalSample> eval;
};

// Splits on the separator; errors on empty or duplicate subtags.
MorphTag parse_tag(const std::string& raw, char separator = ';');

// Splits camel-case tags like "1SgPresInd" into [1, Sg, Pres, Ind].
MorphTag parse_tag_camel(const std::string& raw);

// Reads a UTF-8 TSV file (lemma<TAB>form<TAB>tag, ';'-separated subtags).
// '#'-prefixed lines are comments; blank lines are skipped. Warns on stderr
// when a file mixes precomposed and combining-mark spellings.
std::vector<Sample> load_unimorph(const std::string& path,
                                  const LanguageCode& language);

// One Paradigm per distinct lemma; errors when the same (lemma, tag) carries
// two different forms.
std::vector<Paradigm> group_paradigms(const std::vector<Sample>& samples);

// Uniform sampling without replacement from each pool; target test, dev and
// train are drawn in that order and are disjoint on (lemma, tag). With
// exclude_overlapping_lemmata, source train samples whose lemma occurs in any
// target split are dropped after sampling (so the source train set shrinks).
DatasetSplit sample_transfer_dataset(const std::vector<Sample>& source_samples,
                                     const std::vector<Sample>& target_samples,
                                     size_t n_s, size_t n_t, size_t dev_size,
                                     size_t test_size, uint64_t seed,
                                     bool exclude_overlapping_lemmata = false);

std::vector<size_t> learning_curve_sizes();

// Partitions the target tag inventory into seen/unseen halves (seen takes the
// floor) and draws one train sample per seen tag with pairwise-distinct
// lemmata. Eval samples are annotated one-shot or zero-shot.
ShotSplit make_shot_split(const std::vector<Sample>& target_samples,
                          uint64_t seed);

CipherMap make_cipher(const std::set<char32_t>& char_domain,
                      const std::set<std::string>& subtag_domain,
                      uint64_t seed);

// Maps lemma and form characters and subtags pointwise; language unchanged.
Sample apply_cipher(const Sample& sample, const CipherMap& cipher);

}  // namespace mxfr
