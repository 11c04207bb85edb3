#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hsd::uni {

// Coarse character classes used by the normalizer and tokenizers.
enum class CharClass : uint8_t { Other = 0, Letter = 1, Mark = 2, Digit = 3, Space = 4 };

// UTF-8 <-> codepoints. Invalid byte sequences decode to U+FFFD, one
// replacement per offending byte.
std::vector<uint32_t> decode_utf8(std::string_view s);
void append_utf8(std::string& out, uint32_t cp);
std::string encode_utf8(const std::vector<uint32_t>& cps);

// Canonical composition (NFC) over codepoints: full canonical
// decomposition, canonical reordering, then primary composition.
std::vector<uint32_t> nfc(const std::vector<uint32_t>& cps);

uint8_t combining_class(uint32_t cp);
uint32_t compose_pair(uint32_t a, uint32_t b);  // 0 when no primary composite
CharClass char_class(uint32_t cp);
uint32_t to_lower(uint32_t cp);

inline bool is_letter(uint32_t cp) { return char_class(cp) == CharClass::Letter; }
inline bool is_space(uint32_t cp) { return char_class(cp) == CharClass::Space; }

}  // namespace hsd::uni
