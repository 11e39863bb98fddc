#include "mxfr/encoding.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include "mxfr/errors.hpp"
#include "mxfr/rng.hpp"
#include "mxfr/utf8.hpp"

namespace mxfr {

namespace {

const char* role_name(SymbolRole r) {
  switch (r) {
    case SymbolRole::Special: return "special";
    case SymbolRole::Language: return "lang";
    case SymbolRole::Subtag: return "subtag";
    case SymbolRole::Character: return "char";
  }
  return "?";
}

SymbolRole role_from_name(const std::string& s) {
  if (s == "special") return SymbolRole::Special;
  if (s == "lang") return SymbolRole::Language;
  if (s == "subtag") return SymbolRole::Subtag;
  if (s == "char") return SymbolRole::Character;
  throw DataError("unknown symbol role: '" + s + "'");
}

std::vector<Symbol> specials() {
  return {{SymbolRole::Special, "BOW"},
          {SymbolRole::Special, "EOW"},
          {SymbolRole::Special, "PAD"}};
}

}  // namespace

void SymbolVocab::rebuild_index() {
  input_index_.clear();
  output_index_.clear();
  for (size_t i = 0; i < input_symbols_.size(); ++i)
    input_index_[{static_cast<int>(input_symbols_[i].role),
                  input_symbols_[i].text}] = static_cast<int>(i);
  for (size_t i = 0; i < output_symbols_.size(); ++i)
    output_index_[{static_cast<int>(output_symbols_[i].role),
                   output_symbols_[i].text}] = static_cast<int>(i);
}

SymbolVocab SymbolVocab::build(const std::vector<Sample>& samples) {
  if (samples.empty()) throw DataError("cannot build vocabulary: no samples");
  std::set<std::string> langs;
  std::set<std::string> subtags;
  std::set<char32_t> chars;
  for (const Sample& s : samples) {
    langs.insert(s.language.code);
    for (const std::string& sub : s.tag.subtags) subtags.insert(sub);
    for (char32_t cp : utf8::decode(s.lemma)) chars.insert(cp);
    for (char32_t cp : utf8::decode(s.form)) chars.insert(cp);
  }
  SymbolVocab v;
  v.input_symbols_ = specials();
  for (const auto& l : langs)
    v.input_symbols_.push_back({SymbolRole::Language, l});
  for (const auto& s : subtags)
    v.input_symbols_.push_back({SymbolRole::Subtag, s});
  for (char32_t cp : chars)
    v.input_symbols_.push_back({SymbolRole::Character, utf8::encode_one(cp)});
  v.output_symbols_ = specials();
  for (char32_t cp : chars)
    v.output_symbols_.push_back({SymbolRole::Character, utf8::encode_one(cp)});
  v.rebuild_index();
  return v;
}

int SymbolVocab::input_id(const Symbol& s) const {
  auto it = input_index_.find({static_cast<int>(s.role), s.text});
  if (it == input_index_.end())
    throw DataError(std::string("unknown input symbol (") +
                    role_name(s.role) + "): '" + s.text + "'");
  return it->second;
}

int SymbolVocab::output_id(const Symbol& s) const {
  auto it = output_index_.find({static_cast<int>(s.role), s.text});
  if (it == output_index_.end())
    throw DataError(std::string("unknown output symbol (") +
                    role_name(s.role) + "): '" + s.text + "'");
  return it->second;
}

void SymbolVocab::write(std::ostream& out) const {
  out << "input\t" << input_symbols_.size() << "\n";
  for (const Symbol& s : input_symbols_)
    out << role_name(s.role) << "\t" << s.text << "\n";
  out << "output\t" << output_symbols_.size() << "\n";
  for (const Symbol& s : output_symbols_)
    out << role_name(s.role) << "\t" << s.text << "\n";
}

SymbolVocab SymbolVocab::read(std::istream& in) {
  SymbolVocab v;
  auto read_section = [&in](const std::string& expect,
                            std::vector<Symbol>& dst) {
    std::string line;
    if (!std::getline(in, line))
      throw DataError("vocabulary: missing '" + expect + "' header");
    size_t tab = line.find('\t');
    if (tab == std::string::npos || line.substr(0, tab) != expect)
      throw DataError("vocabulary: bad header '" + line + "'");
    size_t n = std::stoul(line.substr(tab + 1));
    for (size_t i = 0; i < n; ++i) {
      if (!std::getline(in, line))
        throw DataError("vocabulary: truncated at symbol " +
                        std::to_string(i));
      size_t t = line.find('\t');
      if (t == std::string::npos)
        throw DataError("vocabulary: malformed line '" + line + "'");
      dst.push_back({role_from_name(line.substr(0, t)), line.substr(t + 1)});
    }
  };
  read_section("input", v.input_symbols_);
  read_section("output", v.output_symbols_);
  v.rebuild_index();
  return v;
}

bool SymbolVocab::operator==(const SymbolVocab& o) const {
  return input_symbols_ == o.input_symbols_ &&
         output_symbols_ == o.output_symbols_;
}

std::vector<int> encode_input(const Sample& sample, const SymbolVocab& vocab) {
  std::vector<int> ids;
  ids.push_back(SymbolVocab::kBow);
  ids.push_back(vocab.input_id({SymbolRole::Language, sample.language.code}));
  for (const std::string& sub : sample.tag.subtags)
    ids.push_back(vocab.input_id({SymbolRole::Subtag, sub}));
  for (char32_t cp : utf8::decode(sample.lemma))
    ids.push_back(vocab.input_id({SymbolRole::Character, utf8::encode_one(cp)}));
  ids.push_back(SymbolVocab::kEow);
  return ids;
}

std::vector<int> encode_target(const std::string& form,
                               const SymbolVocab& vocab) {
  std::vector<int> ids;
  ids.push_back(SymbolVocab::kBow);
  for (char32_t cp : utf8::decode(form))
    ids.push_back(
        vocab.output_id({SymbolRole::Character, utf8::encode_one(cp)}));
  ids.push_back(SymbolVocab::kEow);
  return ids;
}

EncodedSample encode_sample(const Sample& sample, const SymbolVocab& vocab) {
  return {encode_input(sample, vocab), encode_target(sample.form, vocab),
          sample.language};
}

Sample decode_input(const std::vector<int>& input_ids,
                    const SymbolVocab& vocab) {
  if (input_ids.size() < 3 || input_ids.front() != SymbolVocab::kBow ||
      input_ids.back() != SymbolVocab::kEow)
    throw DataError("decode_input: sequence not framed by BOW/EOW");
  Sample s;
  bool have_lang = false;
  for (size_t i = 1; i + 1 < input_ids.size(); ++i) {
    const Symbol& sym = vocab.input_symbol(input_ids[i]);
    switch (sym.role) {
      case SymbolRole::Language:
        if (have_lang) throw DataError("decode_input: two language symbols");
        s.language = LanguageCode(sym.text);
        have_lang = true;
        break;
      case SymbolRole::Subtag:
        s.tag.subtags.push_back(sym.text);
        break;
      case SymbolRole::Character:
        s.lemma += sym.text;
        break;
      case SymbolRole::Special:
        throw DataError("decode_input: interior special symbol");
    }
  }
  if (!have_lang) throw DataError("decode_input: missing language symbol");
  return s;
}

std::string decode_output(const std::vector<int>& char_ids,
                          const SymbolVocab& vocab) {
  std::string out;
  for (int id : char_ids) {
    const Symbol& sym = vocab.output_symbol(id);
    if (sym.role != SymbolRole::Character)
      throw DataError("decode_output: non-character symbol in output");
    out += sym.text;
  }
  return out;
}

std::vector<Batch> make_batches(const std::vector<EncodedSample>& encoded,
                                size_t batch_size, uint64_t seed,
                                bool shuffle) {
  if (batch_size < 1) throw DataError("batch_size must be >= 1");
  std::vector<size_t> order(encoded.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle) {
    Rng rng(seed);
    rng.shuffle(order);
  }
  std::vector<Batch> batches;
  for (size_t start = 0; start < order.size(); start += batch_size) {
    size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    size_t max_in = 0, max_out = 0;
    for (size_t k = start; k < end; ++k) {
      max_in = std::max(max_in, encoded[order[k]].input_ids.size());
      max_out = std::max(max_out, encoded[order[k]].target_ids.size());
    }
    for (size_t k = start; k < end; ++k) {
      const EncodedSample& e = encoded[order[k]];
      std::vector<int> in_row(max_in, SymbolVocab::kPad);
      std::vector<bool> in_mask(max_in, false);
      for (size_t i = 0; i < e.input_ids.size(); ++i) {
        in_row[i] = e.input_ids[i];
        in_mask[i] = true;
      }
      std::vector<int> out_row(max_out, SymbolVocab::kPad);
      std::vector<bool> out_mask(max_out, false);
      for (size_t i = 0; i < e.target_ids.size(); ++i) {
        out_row[i] = e.target_ids[i];
        out_mask[i] = true;
      }
      b.input_matrix.push_back(std::move(in_row));
      b.input_mask.push_back(std::move(in_mask));
      b.target_matrix.push_back(std::move(out_row));
      b.target_mask.push_back(std::move(out_mask));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

EncodedSample batch_row(const Batch& batch, size_t row) {
  EncodedSample e;
  for (size_t i = 0; i < batch.input_matrix[row].size(); ++i)
    if (batch.input_mask[row][i])
      e.input_ids.push_back(batch.input_matrix[row][i]);
  for (size_t i = 0; i < batch.target_matrix[row].size(); ++i)
    if (batch.target_mask[row][i])
      e.target_ids.push_back(batch.target_matrix[row][i]);
  return e;
}

}  // namespace mxfr
