#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mxfr/corpus.hpp"

namespace mxfr {

enum class SymbolRole { Special, Language, Subtag, Character };

struct Symbol {
  SymbolRole role;
  std::string text;  // UTF-8; a Character symbol holds one scalar value

  bool operator==(const Symbol&) const = default;
};

// Bijection between symbols and integer ids, shared across all languages of
// an experiment. Ordering is deterministic: specials, then language codes,
// subtags and characters, each sorted; so identical data always yields
// identical ids and checkpoints stay portable.
class SymbolVocab {
 public:
  static constexpr int kBow = 0;
  static constexpr int kEow = 1;
  static constexpr int kPad = 2;

  // Builds over every sample of every split and language of the experiment.
  static SymbolVocab build(const std::vector<Sample>& samples);

  int input_id(const Symbol& s) const;   // throws on unknown symbol
  int output_id(const Symbol& s) const;

  const Symbol& input_symbol(int id) const { return input_symbols_.at(id); }
  const Symbol& output_symbol(int id) const { return output_symbols_.at(id); }
  int input_size() const { return static_cast<int>(input_symbols_.size()); }
  int output_size() const { return static_cast<int>(output_symbols_.size()); }

  void write(std::ostream& out) const;
  static SymbolVocab read(std::istream& in);

  bool operator==(const SymbolVocab& o) const;

 private:
  std::vector<Symbol> input_symbols_;
  std::vector<Symbol> output_symbols_;
  std::map<std::pair<int, std::string>, int> input_index_;
  std::map<std::pair<int, std::string>, int> output_index_;

  void rebuild_index();
};

struct EncodedSample {
  std::vector<int> input_ids;   // [BOW, lang, subtags..., chars..., EOW]
  std::vector<int> target_ids;  // [BOW, chars..., EOW]
  LanguageCode language;
};

struct Batch {
  // batch x max_len, padded with PAD where the mask is false.
  std::vector<std::vector<int>> input_matrix;
  std::vector<std::vector<bool>> input_mask;
  std::vector<std::vector<int>> target_matrix;
  std::vector<std::vector<bool>> target_mask;

  size_t size() const { return input_matrix.size(); }
};

std::vector<int> encode_input(const Sample& sample, const SymbolVocab& vocab);
std::vector<int> encode_target(const std::string& form,
                               const SymbolVocab& vocab);
EncodedSample encode_sample(const Sample& sample, const SymbolVocab& vocab);

// Inverse of encode_input, for round-trip checks.
Sample decode_input(const std::vector<int>& input_ids,
                    const SymbolVocab& vocab);

// Output character ids -> string (specials are rejected).
std::string decode_output(const std::vector<int>& char_ids,
                          const SymbolVocab& vocab);

// Groups into batches of `batch_size` (final short batch kept), padding each
// batch to its own max lengths. With shuffle, applies a seed-deterministic
// permutation first.
std::vector<Batch> make_batches(const std::vector<EncodedSample>& encoded,
                                size_t batch_size, uint64_t seed, bool shuffle);

// Strips padding from row `row` of a batch.
EncodedSample batch_row(const Batch& batch, size_t row);

}  // namespace mxfr
