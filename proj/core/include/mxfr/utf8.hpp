#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mxfr::utf8 {

// Decodes a UTF-8 string into Unicode scalar values.
// Throws DataError on malformed input.
std::vector<char32_t> decode(const std::string& s);

std::string encode(const std::vector<char32_t>& cps);
std::string encode_one(char32_t cp);

// True for combining diacritical marks (U+0300..U+036F).
bool is_combining_mark(char32_t cp);

// True for precomposed Latin letters with diacritics
// (Latin-1 Supplement letters and Latin Extended-A).
bool is_precomposed_latin(char32_t cp);

}  // namespace mxfr::utf8
