#include "hsd/unicode.hpp"

#include <algorithm>

namespace hsd::uni {

namespace {

struct DecompEntry { uint32_t cp; uint32_t offset; uint32_t len; };
struct CccEntry { uint32_t cp; uint8_t ccc; };
struct CompEntry { uint32_t first; uint32_t second; uint32_t composed; };
struct LowerEntry { uint32_t cp; uint32_t lower; };
struct RangeEntry { uint32_t first; uint32_t last; uint8_t klass; };

#include "unicode_tables.inc"

constexpr uint32_t kHangulSBase = 0xAC00;
constexpr uint32_t kHangulLBase = 0x1100;
constexpr uint32_t kHangulVBase = 0x1161;
constexpr uint32_t kHangulTBase = 0x11A7;
constexpr uint32_t kHangulLCount = 19;
constexpr uint32_t kHangulVCount = 21;
constexpr uint32_t kHangulTCount = 28;
constexpr uint32_t kHangulNCount = kHangulVCount * kHangulTCount;
constexpr uint32_t kHangulSCount = kHangulLCount * kHangulNCount;

template <typename Entry, size_t N>
const Entry* lookup(const Entry (&table)[N], uint32_t cp) {
  auto it = std::lower_bound(std::begin(table), std::end(table), cp,
                             [](const Entry& e, uint32_t c) { return e.cp < c; });
  if (it != std::end(table) && it->cp == cp) return &*it;
  return nullptr;
}

void decompose_into(uint32_t cp, std::vector<uint32_t>& out) {
  if (cp >= kHangulSBase && cp < kHangulSBase + kHangulSCount) {
    uint32_t idx = cp - kHangulSBase;
    out.push_back(kHangulLBase + idx / kHangulNCount);
    out.push_back(kHangulVBase + (idx % kHangulNCount) / kHangulTCount);
    uint32_t t = idx % kHangulTCount;
    if (t) out.push_back(kHangulTBase + t);
    return;
  }
  if (const DecompEntry* e = lookup(kDecomp, cp)) {
    for (uint32_t i = 0; i < e->len; ++i) out.push_back(kDecompFlat[e->offset + i]);
    return;
  }
  out.push_back(cp);
}

}  // namespace

std::vector<uint32_t> decode_utf8(std::string_view s) {
  std::vector<uint32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    uint8_t b = static_cast<uint8_t>(s[i]);
    uint32_t cp = 0;
    int extra = 0;
    if (b < 0x80) {
      cp = b;
    } else if ((b & 0xE0) == 0xC0) {
      cp = b & 0x1F; extra = 1;
    } else if ((b & 0xF0) == 0xE0) {
      cp = b & 0x0F; extra = 2;
    } else if ((b & 0xF8) == 0xF0) {
      cp = b & 0x07; extra = 3;
    } else {
      out.push_back(0xFFFD); ++i;
      continue;
    }
    if (i + extra >= s.size()) {
      out.push_back(0xFFFD); ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      uint8_t c = static_cast<uint8_t>(s[i + k]);
      if ((c & 0xC0) != 0x80) { ok = false; break; }
      cp = (cp << 6) | (c & 0x3F);
    }
    if (!ok || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF) ||
        (extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
        (extra == 3 && cp < 0x10000)) {
      out.push_back(0xFFFD); ++i;
      continue;
    }
    out.push_back(cp);
    i += 1 + extra;
  }
  return out;
}

void append_utf8(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode_utf8(const std::vector<uint32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (uint32_t cp : cps) append_utf8(out, cp);
  return out;
}

uint8_t combining_class(uint32_t cp) {
  if (const CccEntry* e = lookup(kCcc, cp)) return e->ccc;
  return 0;
}

uint32_t compose_pair(uint32_t a, uint32_t b) {
  // Hangul LV and LVT composition.
  if (a >= kHangulLBase && a < kHangulLBase + kHangulLCount &&
      b >= kHangulVBase && b < kHangulVBase + kHangulVCount) {
    return kHangulSBase + ((a - kHangulLBase) * kHangulVCount + (b - kHangulVBase)) * kHangulTCount;
  }
  if (a >= kHangulSBase && a < kHangulSBase + kHangulSCount &&
      (a - kHangulSBase) % kHangulTCount == 0 &&
      b > kHangulTBase && b < kHangulTBase + kHangulTCount) {
    return a + (b - kHangulTBase);
  }
  auto it = std::lower_bound(std::begin(kComp), std::end(kComp), std::make_pair(a, b),
                             [](const CompEntry& e, const std::pair<uint32_t, uint32_t>& k) {
                               return e.first != k.first ? e.first < k.first : e.second < k.second;
                             });
  if (it != std::end(kComp) && it->first == a && it->second == b) return it->composed;
  return 0;
}

CharClass char_class(uint32_t cp) {
  auto it = std::upper_bound(std::begin(kClassRanges), std::end(kClassRanges), cp,
                             [](uint32_t c, const RangeEntry& e) { return c < e.first; });
  if (it != std::begin(kClassRanges)) {
    --it;
    if (cp >= it->first && cp <= it->last) return static_cast<CharClass>(it->klass);
  }
  return CharClass::Other;
}

uint32_t to_lower(uint32_t cp) {
  if (const LowerEntry* e = lookup(kLower, cp)) return e->lower;
  return cp;
}

std::vector<uint32_t> nfc(const std::vector<uint32_t>& cps) {
  std::vector<uint32_t> buf;
  buf.reserve(cps.size());
  for (uint32_t cp : cps) decompose_into(cp, buf);

  // Canonical ordering: stable-sort maximal runs of nonzero combining class.
  size_t i = 0;
  while (i < buf.size()) {
    if (combining_class(buf[i]) == 0) { ++i; continue; }
    size_t j = i;
    while (j < buf.size() && combining_class(buf[j]) != 0) ++j;
    std::stable_sort(buf.begin() + i, buf.begin() + j,
                     [](uint32_t a, uint32_t b) { return combining_class(a) < combining_class(b); });
    i = j;
  }

  // Composition pass. last_cc is the combining class of the last emitted
  // character since the starter (-1 right after the starter itself), so
  // `last_cc < cc` is exactly the not-blocked condition on ordered input.
  std::vector<uint32_t> out;
  out.reserve(buf.size());
  ptrdiff_t last_starter = -1;
  int last_cc = -1;
  for (uint32_t cp : buf) {
    int cc = combining_class(cp);
    if (last_starter >= 0 && last_cc < cc) {
      if (uint32_t comp = compose_pair(out[last_starter], cp)) {
        out[last_starter] = comp;
        continue;
      }
    }
    if (cc == 0) {
      last_starter = static_cast<ptrdiff_t>(out.size());
      last_cc = -1;
    } else {
      last_cc = cc;
    }
    out.push_back(cp);
  }
  return out;
}

}  // namespace hsd::uni
