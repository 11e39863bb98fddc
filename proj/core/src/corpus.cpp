#include "mxfr/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mxfr/errors.hpp"
#include "mxfr/rng.hpp"
#include "mxfr/utf8.hpp"

namespace mxfr {

LanguageCode::LanguageCode(std::string c) : code(std::move(c)) {
  if (code.size() < 2 || code.size() > 4)
    throw DataError("language code must be 2-4 lowercase letters: '" + code +
                    "'");
  for (char ch : code)
    if (ch < 'a' || ch > 'z')
      throw DataError("language code must match [a-z]{2,4}: '" + code + "'");
}

std::string MorphTag::key() const {
  std::string out;
  for (size_t i = 0; i < subtags.size(); ++i) {
    if (i) out += ';';
    out += subtags[i];
  }
  return out;
}

MorphTag parse_tag(const std::string& raw, char separator) {
  if (raw.empty()) throw DataError("empty morphological tag");
  MorphTag tag;
  std::string cur;
  for (char ch : raw) {
    if (ch == separator) {
      if (cur.empty())
        throw DataError("malformed tag '" + raw + "': empty subtag");
      tag.subtags.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (cur.empty()) throw DataError("malformed tag '" + raw + "': empty subtag");
  tag.subtags.push_back(cur);
  std::set<std::string> seen;
  for (const auto& s : tag.subtags)
    if (!seen.insert(s).second)
      throw DataError("malformed tag '" + raw + "': duplicate subtag '" + s +
                      "'");
  return tag;
}

MorphTag parse_tag_camel(const std::string& raw) {
  if (raw.empty()) throw DataError("empty morphological tag");
  // A subtag starts at an uppercase letter or a digit run.
  MorphTag tag;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      tag.subtags.push_back(cur);
      cur.clear();
    }
  };
  for (size_t i = 0; i < raw.size(); ++i) {
    char ch = raw[i];
    bool upper = std::isupper(static_cast<unsigned char>(ch)) != 0;
    bool digit = std::isdigit(static_cast<unsigned char>(ch)) != 0;
    bool prev_digit =
        !cur.empty() && std::isdigit(static_cast<unsigned char>(cur.back()));
    if (upper || (digit && !prev_digit)) flush();
    cur += ch;
  }
  flush();
  std::set<std::string> seen;
  for (const auto& s : tag.subtags)
    if (!seen.insert(s).second)
      throw DataError("malformed tag '" + raw + "': duplicate subtag '" + s +
                      "'");
  return tag;
}

namespace {

void validate_text_field(const std::string& value, const char* what,
                         size_t line_no) {
  if (value.empty())
    throw DataError(std::string("empty ") + what + " at line " +
                    std::to_string(line_no));
  if (value.find('\t') != std::string::npos ||
      value.find('\n') != std::string::npos)
    throw DataError(std::string(what) + " contains tab or newline at line " +
                    std::to_string(line_no));
}

}  // namespace

std::vector<Sample> load_unimorph(const std::string& path,
                                  const LanguageCode& language) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path);
  std::vector<Sample> samples;
  std::string line;
  size_t line_no = 0;
  bool has_combining = false, has_precomposed = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') continue;
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t pos = line.find('\t', start);
      if (pos == std::string::npos) {
        cols.push_back(line.substr(start));
        break;
      }
      cols.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (cols.size() != 3)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 3 " +
                      "tab-separated columns, got " +
                      std::to_string(cols.size()));
    validate_text_field(cols[0], "lemma", line_no);
    validate_text_field(cols[1], "form", line_no);
    MorphTag tag;
    try {
      tag = parse_tag(cols[2]);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    for (const std::string& text : {cols[0], cols[1]}) {
      std::vector<char32_t> cps;
      try {
        cps = utf8::decode(text);
      } catch (const DataError& e) {
        throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
      }
      for (char32_t cp : cps) {
        if (utf8::is_combining_mark(cp)) has_combining = true;
        if (utf8::is_precomposed_latin(cp)) has_precomposed = true;
      }
    }
    samples.push_back(Sample{language, cols[0], std::move(tag), cols[1]});
  }
  if (has_combining && has_precomposed)
    std::cerr << "warning: " << path
              << " mixes precomposed and combining-mark spellings; forms are "
                 "compared without normalization\n";
  return samples;
}

std::vector<Paradigm> group_paradigms(const std::vector<Sample>& samples) {
  std::vector<Paradigm> out;
  std::map<std::string, size_t> index;
  for (const Sample& s : samples) {
    if (!samples.empty() && !(s.language == samples.front().language))
      throw DataError("group_paradigms: mixed languages ('" +
                      samples.front().language.code + "' vs '" +
                      s.language.code + "')");
    auto [it, inserted] = index.emplace(s.lemma, out.size());
    if (inserted) out.push_back(Paradigm{s.language, s.lemma, {}});
    Paradigm& p = out[it->second];
    auto [eit, fresh] = p.entries.emplace(s.tag, s.form);
    if (!fresh && eit->second != s.form)
      throw DataError("conflicting forms for lemma '" + s.lemma + "' tag '" +
                      s.tag.key() + "': '" + eit->second + "' vs '" + s.form +
                      "'");
  }
  return out;
}

namespace {

std::string pair_key(const Sample& s) { return s.lemma + "\x1f" + s.tag.key(); }

// Draws `want` samples from `pool` in shuffled order, skipping samples whose
// (lemma, tag) pair is already in `used`.
std::vector<Sample> draw_disjoint(const std::vector<Sample>& pool,
                                  const std::vector<size_t>& order,
                                  size_t& cursor, size_t want,
                                  std::set<std::string>& used,
                                  const char* split_name) {
  std::vector<Sample> out;
  out.reserve(want);
  while (out.size() < want && cursor < order.size()) {
    const Sample& s = pool[order[cursor++]];
    if (used.insert(pair_key(s)).second) out.push_back(s);
  }
  if (out.size() < want)
    throw DataError(std::string("insufficient target pool for ") + split_name +
                    ": required " + std::to_string(want) + ", available " +
                    std::to_string(out.size()));
  return out;
}

}  // namespace

DatasetSplit sample_transfer_dataset(const std::vector<Sample>& source_samples,
                                     const std::vector<Sample>& target_samples,
                                     size_t n_s, size_t n_t, size_t dev_size,
                                     size_t test_size, uint64_t seed,
                                     bool exclude_overlapping_lemmata) {
  if (dev_size == 0 || test_size == 0)
    throw DataError("dev_size and test_size must be positive");
  if (source_samples.size() < n_s)
    throw DataError("insufficient source pool: required " +
                    std::to_string(n_s) + ", available " +
                    std::to_string(source_samples.size()));
  if (target_samples.size() < n_t + dev_size + test_size)
    throw DataError("insufficient target pool: required " +
                    std::to_string(n_t + dev_size + test_size) +
                    ", available " + std::to_string(target_samples.size()));

  DatasetSplit split;
  split.meta.n_s = n_s;
  split.meta.n_t = n_t;
  split.meta.dev_size = dev_size;
  split.meta.test_size = test_size;
  split.meta.seed = seed;
  if (!source_samples.empty())
    split.meta.source_language = source_samples.front().language.code;
  if (!target_samples.empty())
    split.meta.target_language = target_samples.front().language.code;

  // Target draws come first and in a fixed order (test, dev, train) so that
  // dev/test are shared across all source conditions and across n_t values
  // for a given (target, seed).
  Rng target_rng(derive_seed(seed, 0));
  std::vector<size_t> order(target_samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  target_rng.shuffle(order);
  std::set<std::string> used;
  size_t cursor = 0;
  split.test = draw_disjoint(target_samples, order, cursor, test_size, used,
                             "test");
  split.dev =
      draw_disjoint(target_samples, order, cursor, dev_size, used, "dev");
  std::vector<Sample> target_train =
      draw_disjoint(target_samples, order, cursor, n_t, used, "train");

  Rng source_rng(derive_seed(seed, 1));
  std::vector<size_t> chosen = source_rng.sample_indices(source_samples.size(),
                                                         n_s);
  std::set<std::string> target_lemmata;
  if (exclude_overlapping_lemmata) {
    for (const auto* v : {&split.test, &split.dev, &target_train})
      for (const Sample& s : *v) target_lemmata.insert(s.lemma);
  }
  for (size_t idx : chosen) {
    const Sample& s = source_samples[idx];
    if (exclude_overlapping_lemmata && target_lemmata.count(s.lemma)) continue;
    split.train.push_back(s);
  }
  split.meta.n_s = split.train.size();
  for (Sample& s : target_train) split.train.push_back(std::move(s));
  return split;
}

std::vector<size_t> learning_curve_sizes() {
  return {100, 400, 800, 1600, 3200, 6400, 12000};
}

ShotSplit make_shot_split(const std::vector<Sample>& target_samples,
                          uint64_t seed) {
  std::set<MorphTag> tag_set;
  for (const Sample& s : target_samples) tag_set.insert(s.tag);
  if (tag_set.size() < 2)
    throw DataError("shot split requires at least 2 distinct tags, found " +
                    std::to_string(tag_set.size()));

  std::vector<MorphTag> tags(tag_set.begin(), tag_set.end());
  Rng rng(derive_seed(seed, 2));
  rng.shuffle(tags);
  size_t n_seen = tags.size() / 2;

  ShotSplit split;
  for (size_t i = 0; i < tags.size(); ++i)
    (i < n_seen ? split.seen_tags : split.unseen_tags).insert(tags[i]);

  // One train sample per seen tag, all lemmata pairwise distinct. Candidates
  // per tag are scanned in a shuffled order to keep the draw uniform.
  std::map<MorphTag, std::vector<size_t>> by_tag;
  for (size_t i = 0; i < target_samples.size(); ++i)
    by_tag[target_samples[i].tag].push_back(i);
  std::set<std::string> used_lemmata;
  std::set<std::string> used_pairs;
  for (size_t i = 0; i < n_seen; ++i) {
    const MorphTag& tag = tags[i];
    std::vector<size_t> candidates = by_tag.at(tag);
    rng.shuffle(candidates);
    bool found = false;
    for (size_t idx : candidates) {
      const Sample& s = target_samples[idx];
      if (used_lemmata.count(s.lemma)) continue;
      used_lemmata.insert(s.lemma);
      used_pairs.insert(pair_key(s));
      split.train.push_back(s);
      found = true;
      break;
    }
    if (!found)
      throw DataError(
          "cannot pick a train sample with an unused lemma for tag '" +
          tag.key() + "'; try a different seed");
  }

  for (const Sample& s : target_samples) {
    if (used_pairs.count(pair_key(s))) continue;
    ShotClass cls = split.seen_tags.count(s.tag) ? ShotClass::OneShot
                                                 : ShotClass::ZeroShot;
    split.eval.push_back(ShotEvalSample{s, cls});
  }
  return split;
}

CipherMap make_cipher(const std::set<char32_t>& char_domain,
                      const std::set<std::string>& subtag_domain,
                      uint64_t seed) {
  if (char_domain.empty() || subtag_domain.empty())
    throw DataError("cipher domains must be non-empty");
  CipherMap cipher;
  cipher.seed = seed;
  Rng rng(derive_seed(seed, 3));
  {
    std::vector<char32_t> keys(char_domain.begin(), char_domain.end());
    std::vector<char32_t> vals = keys;
    rng.shuffle(vals);
    for (size_t i = 0; i < keys.size(); ++i) cipher.char_map[keys[i]] = vals[i];
  }
  {
    std::vector<std::string> keys(subtag_domain.begin(), subtag_domain.end());
    std::vector<std::string> vals = keys;
    rng.shuffle(vals);
    for (size_t i = 0; i < keys.size(); ++i)
      cipher.subtag_map[keys[i]] = vals[i];
  }
  return cipher;
}

CipherMap CipherMap::inverse() const {
  CipherMap inv;
  inv.seed = seed;
  for (const auto& [k, v] : char_map) inv.char_map[v] = k;
  for (const auto& [k, v] : subtag_map) inv.subtag_map[v] = k;
  return inv;
}

Sample apply_cipher(const Sample& sample, const CipherMap& cipher) {
  auto map_text = [&](const std::string& text) {
    std::vector<char32_t> cps = utf8::decode(text);
    for (char32_t& cp : cps) {
      auto it = cipher.char_map.find(cp);
      if (it == cipher.char_map.end())
        throw DataError("character '" + utf8::encode_one(cp) +
                        "' not in cipher domain");
      cp = it->second;
    }
    return utf8::encode(cps);
  };
  Sample out;
  out.language = sample.language;  // language codes are never ciphered
  out.lemma = map_text(sample.lemma);
  out.form = map_text(sample.form);
  for (const std::string& sub : sample.tag.subtags) {
    auto it = cipher.subtag_map.find(sub);
    if (it == cipher.subtag_map.end())
      throw DataError("subtag '" + sub + "' not in cipher domain");
    out.tag.subtags.push_back(it->second);
  }
  return out;
}

}  // namespace mxfr
