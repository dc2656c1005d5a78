#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace visrep {

/// Decodes UTF-8 into codepoints. Malformed bytes decode to U+FFFD.
std::u32string utf8_decode(std::string_view text);

std::string utf8_encode(char32_t cp);
std::string utf8_encode(std::u32string_view cps);

/// Splits a UTF-8 string into one std::string per codepoint.
std::vector<std::string> utf8_chars(std::string_view text);

inline bool is_space(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\v' ||
         cp == U'\f' || cp == 0x00A0 || cp == 0x3000;
}

/// Splits on runs of whitespace; leading/trailing whitespace is dropped.
std::vector<std::string> split_whitespace(std::string_view text);

}  // namespace visrep
