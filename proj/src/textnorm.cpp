#include "hsd/textnorm.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hsd/unicode.hpp"

namespace hsd::textnorm {

namespace {

// Vietnamese vowel grid: 12 bases x (plain, grave, acute, hook, tilde, dot),
// lowercase row then uppercase row per base.
constexpr int kNumBases = 12;
constexpr int kNumTones = 6;
constexpr uint32_t kVowelGrid[2 * kNumBases][kNumTones] = {
    {0x0061, 0x00E0, 0x00E1, 0x1EA3, 0x00E3, 0x1EA1},  // a
    {0x0041, 0x00C0, 0x00C1, 0x1EA2, 0x00C3, 0x1EA0},  // A
    {0x0103, 0x1EB1, 0x1EAF, 0x1EB3, 0x1EB5, 0x1EB7},  // a-breve
    {0x0102, 0x1EB0, 0x1EAE, 0x1EB2, 0x1EB4, 0x1EB6},
    {0x00E2, 0x1EA7, 0x1EA5, 0x1EA9, 0x1EAB, 0x1EAD},  // a-circumflex
    {0x00C2, 0x1EA6, 0x1EA4, 0x1EA8, 0x1EAA, 0x1EAC},
    {0x0065, 0x00E8, 0x00E9, 0x1EBB, 0x1EBD, 0x1EB9},  // e
    {0x0045, 0x00C8, 0x00C9, 0x1EBA, 0x1EBC, 0x1EB8},
    {0x00EA, 0x1EC1, 0x1EBF, 0x1EC3, 0x1EC5, 0x1EC7},  // e-circumflex
    {0x00CA, 0x1EC0, 0x1EBE, 0x1EC2, 0x1EC4, 0x1EC6},
    {0x0069, 0x00EC, 0x00ED, 0x1EC9, 0x0129, 0x1ECB},  // i
    {0x0049, 0x00CC, 0x00CD, 0x1EC8, 0x0128, 0x1ECA},
    {0x006F, 0x00F2, 0x00F3, 0x1ECF, 0x00F5, 0x1ECD},  // o
    {0x004F, 0x00D2, 0x00D3, 0x1ECE, 0x00D5, 0x1ECC},
    {0x00F4, 0x1ED3, 0x1ED1, 0x1ED5, 0x1ED7, 0x1ED9},  // o-circumflex
    {0x00D4, 0x1ED2, 0x1ED0, 0x1ED4, 0x1ED6, 0x1ED8},
    {0x01A1, 0x1EDD, 0x1EDB, 0x1EDF, 0x1EE1, 0x1EE3},  // o-horn
    {0x01A0, 0x1EDC, 0x1EDA, 0x1EDE, 0x1EE0, 0x1EE2},
    {0x0075, 0x00F9, 0x00FA, 0x1EE7, 0x0169, 0x1EE5},  // u
    {0x0055, 0x00D9, 0x00DA, 0x1EE6, 0x0168, 0x1EE4},
    {0x01B0, 0x1EEB, 0x1EE9, 0x1EED, 0x1EEF, 0x1EF1},  // u-horn
    {0x01AF, 0x1EEA, 0x1EE8, 0x1EEC, 0x1EEE, 0x1EF0},
    {0x0079, 0x1EF3, 0x00FD, 0x1EF7, 0x1EF9, 0x1EF5},  // y
    {0x0059, 0x1EF2, 0x00DD, 0x1EF6, 0x1EF8, 0x1EF4},
};

// Bases with a quality mark (breve, circumflex, horn); tone placement prefers
// these. Grid row indices /2: a=0 abreve=1 acirc=2 e=3 ecirc=4 i=5 o=6 ocirc=7
// ohorn=8 u=9 uhorn=10 y=11.
constexpr bool kMarkedBase[kNumBases] = {false, true, true,  false, true, false,
                                         false, true, true,  false, true, false};

struct VowelInfo {
  int base = -1;   // 0..11
  int tone = 0;    // 0..5
  bool upper = false;
};

bool lookup_vowel(uint32_t cp, VowelInfo& out) {
  for (int row = 0; row < 2 * kNumBases; ++row) {
    for (int tone = 0; tone < kNumTones; ++tone) {
      if (kVowelGrid[row][tone] == cp) {
        out.base = row / 2;
        out.tone = tone;
        out.upper = (row % 2) == 1;
        return true;
      }
    }
  }
  return false;
}

uint32_t vowel_codepoint(int base, int tone, bool upper) {
  return kVowelGrid[2 * base + (upper ? 1 : 0)][tone];
}

bool is_vietnamese_consonant(uint32_t cp) {
  uint32_t lo = uni::to_lower(cp);
  if (lo == 0x111) return true;  // dj
  return lo >= 'a' && lo <= 'z';
}

// Re-place a single tone mark onto the main vowel of the syllable's vowel
// cluster. Applied per run of letters; runs that are not plain Vietnamese
// syllables (multiple tones, foreign letters) pass through untouched.
void repair_tone_marks(std::vector<uint32_t>& word) {
  struct Slot { size_t pos; VowelInfo v; };
  std::vector<Slot> vowels;
  int tone = 0;
  int tone_count = 0;
  size_t tone_pos = 0;
  for (size_t i = 0; i < word.size(); ++i) {
    VowelInfo v;
    if (lookup_vowel(word[i], v)) {
      vowels.push_back({i, v});
      if (v.tone != 0) {
        ++tone_count;
        tone = v.tone;
        tone_pos = i;
      }
    } else if (!is_vietnamese_consonant(word[i])) {
      return;  // not a Vietnamese letter run
    }
  }
  if (tone_count != 1 || vowels.empty()) return;

  // The contiguous vowel cluster containing the tone.
  size_t ti = 0;
  while (vowels[ti].pos != tone_pos) ++ti;
  size_t lo = ti, hi = ti;
  while (lo > 0 && vowels[lo - 1].pos + 1 == vowels[lo].pos) --lo;
  while (hi + 1 < vowels.size() && vowels[hi].pos + 1 == vowels[hi + 1].pos) ++hi;

  // Strip the tone from where it sits.
  word[tone_pos] = vowel_codepoint(vowels[ti].v.base, 0, vowels[ti].v.upper);
  vowels[ti].v.tone = 0;

  // Nucleus adjustment: u after q and i after g act as onset glides.
  size_t first = lo;
  const size_t cluster_start = vowels[lo].pos;
  if (cluster_start > 0 && hi > lo) {
    const uint32_t prev = uni::to_lower(word[cluster_start - 1]);
    const int first_base = vowels[lo].v.base;
    if (prev == 'q' && first_base == 9) ++first;   // qu-
    if (prev == 'g' && first_base == 5) ++first;   // gi-
  }
  if (first > hi) first = hi;

  // Main vowel selection.
  size_t target = hi;
  bool found_marked = false;
  for (size_t k = hi + 1; k-- > first;) {
    if (kMarkedBase[vowels[k].v.base]) {
      target = k;
      found_marked = true;
      break;
    }
  }
  if (!found_marked) {
    const bool final_consonant = vowels[hi].pos + 1 < word.size();
    if (hi > first && !final_consonant) {
      target = hi - 1;  // open syllable: penultimate vowel
    } else {
      target = hi;
    }
  }
  word[vowels[target].pos] =
      vowel_codepoint(vowels[target].v.base, tone, vowels[target].v.upper);
}

bool is_word_char(uint32_t cp) {
  const auto k = uni::char_class(cp);
  return k == uni::CharClass::Letter || k == uni::CharClass::Mark ||
         k == uni::CharClass::Digit || cp == '_';
}

}  // namespace

// ---------------------------------------------------- EmoticonDictionary ---

void EmoticonDictionary::add(const std::string& key, const std::string& value) {
  std::vector<uint32_t> k = uni::nfc(uni::decode_utf8(key));
  std::vector<uint32_t> v = uni::nfc(uni::decode_utf8(value));
  if (k.size() < 2) throw std::invalid_argument("emoticon key must have at least 2 characters: '" + key + "'");
  if (v.size() != 1) throw std::invalid_argument("emoticon value must be a single codepoint: '" + value + "'");
  entries_[k] = v[0];
  max_key_len_ = std::max(max_key_len_, k.size());
}

EmoticonDictionary EmoticonDictionary::parse(std::string_view content, const std::string& origin) {
  EmoticonDictionary dict;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= content.size()) {
    size_t eol = content.find('\n', pos);
    std::string_view line = content.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? content.size() + 1 : eol + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": expected key<TAB>value");
    }
    dict.add(std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)));
  }
  return dict;
}

EmoticonDictionary EmoticonDictionary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open emoticon dictionary: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

EmoticonDictionary EmoticonDictionary::builtin() {
  EmoticonDictionary d;
  const std::pair<const char*, const char*> entries[] = {
      {":)", "\U0001F642"},  {":-)", "\U0001F642"}, {":))", "\U0001F604"}, {"=)", "\U0001F642"},
      {":(", "\U0001F641"},  {":-(", "\U0001F641"}, {":((", "\U0001F622"}, {"=(", "\U0001F641"},
      {":D", "\U0001F603"},  {":d", "\U0001F603"},  {":-D", "\U0001F603"}, {"=D", "\U0001F603"},
      {":P", "\U0001F61B"},  {":p", "\U0001F61B"},  {":-P", "\U0001F61B"}, {":-p", "\U0001F61B"},
      {";)", "\U0001F609"},  {";-)", "\U0001F609"}, {":o", "\U0001F62E"},  {":O", "\U0001F62E"},
      {":'(", "\U0001F622"}, {";(", "\U0001F622"},  {":|", "\U0001F610"},  {":-|", "\U0001F610"},
      {":/", "\U0001F615"},  {":-/", "\U0001F615"}, {":3", "\U0001F60A"},  {"<3", "❤"},
      {"^^", "\U0001F60A"},  {"^_^", "\U0001F60A"}, {"-_-", "\U0001F611"}, {">:(", "\U0001F620"},
      {"T_T", "\U0001F62D"}, {"t_t", "\U0001F62D"}, {"T_t", "\U0001F62D"}, {"t_T", "\U0001F62D"},
  };
  for (const auto& [k, v] : entries) d.add(k, v);
  return d;
}

NormalizationConfig NormalizationConfig::defaults() {
  NormalizationConfig cfg;
  for (uint32_t cp = 0x00; cp <= 0x1F; ++cp) {
    if (cp != '\t' && cp != '\n') cfg.invisible_charset.insert(cp);
  }
  for (uint32_t cp = 0x7F; cp <= 0x9F; ++cp) cfg.invisible_charset.insert(cp);
  cfg.invisible_charset.insert(0x00AD);  // soft hyphen
  cfg.invisible_charset.insert(0x200B);  // zero-width space
  cfg.invisible_charset.insert(0x200C);  // zero-width non-joiner
  cfg.invisible_charset.insert(0x200D);  // zero-width joiner
  cfg.invisible_charset.insert(0x2060);  // word joiner
  cfg.invisible_charset.insert(0xFEFF);  // BOM
  cfg.emoticons = EmoticonDictionary::builtin();
  return cfg;
}

// ------------------------------------------------------------ operations ---

std::string normalize_encoding(std::string_view text) {
  std::vector<uint32_t> cps = uni::nfc(uni::decode_utf8(text));
  // Tone repair per letter run.
  std::vector<uint32_t> out;
  out.reserve(cps.size());
  size_t i = 0;
  while (i < cps.size()) {
    if (uni::is_letter(cps[i])) {
      size_t j = i;
      while (j < cps.size() && uni::is_letter(cps[j])) ++j;
      std::vector<uint32_t> word(cps.begin() + i, cps.begin() + j);
      repair_tone_marks(word);
      out.insert(out.end(), word.begin(), word.end());
      i = j;
    } else {
      out.push_back(cps[i]);
      ++i;
    }
  }
  return uni::encode_utf8(out);
}

std::string canonicalize_emoticons(std::string_view text, const EmoticonDictionary& dict) {
  if (dict.empty()) return std::string(text);
  std::vector<uint32_t> cps = uni::decode_utf8(text);
  const auto& entries = dict.entries();
  std::vector<uint32_t> out;
  out.reserve(cps.size());
  size_t i = 0;
  while (i < cps.size()) {
    const size_t longest = std::min(dict.max_key_len(), cps.size() - i);
    uint32_t matched = 0;
    size_t matched_len = 0;
    for (size_t len = longest; len >= 2; --len) {
      std::vector<uint32_t> key(cps.begin() + i, cps.begin() + i + len);
      auto it = entries.find(key);
      if (it != entries.end()) {
        matched = it->second;
        matched_len = len;
        break;
      }
    }
    if (matched_len) {
      out.push_back(matched);
      i += matched_len;
    } else {
      out.push_back(cps[i]);
      ++i;
    }
  }
  return uni::encode_utf8(out);
}

std::string strip_invisible(std::string_view text, const NormalizationConfig& config) {
  std::vector<uint32_t> cps = uni::decode_utf8(text);
  std::vector<uint32_t> kept;
  kept.reserve(cps.size());
  for (uint32_t cp : cps) {
    if (!config.invisible_charset.count(cp)) kept.push_back(cp);
  }
  // Emit with single spaces: collapse whitespace runs, and when
  // separate_punct is set also break between word characters and
  // punctuation/symbol characters.
  std::vector<uint32_t> out;
  out.reserve(kept.size() + 8);
  bool pending_space = false;
  for (uint32_t cp : kept) {
    if (uni::is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (config.separate_punct && !out.empty() && !pending_space) {
      const bool prev_word = is_word_char(out.back());
      const bool cur_word = is_word_char(cp);
      if (prev_word != cur_word) pending_space = true;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(cp);
  }
  return uni::encode_utf8(out);
}

std::string lowercase(std::string_view text) {
  std::vector<uint32_t> cps = uni::decode_utf8(text);
  for (uint32_t& cp : cps) cp = uni::to_lower(cp);
  return uni::encode_utf8(cps);
}

std::string clean(std::string_view text, const NormalizationConfig& config) {
  return lowercase(strip_invisible(canonicalize_emoticons(normalize_encoding(text), config.emoticons), config));
}

}  // namespace hsd::textnorm
