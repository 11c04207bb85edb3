#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "hsd/rng.hpp"
#include "hsd/unicode.hpp"

using namespace hsd::uni;

namespace {

std::string nfc_str(const std::string& s) { return encode_utf8(nfc(decode_utf8(s))); }

}  // namespace

TEST_CASE("utf8 round trip") {
  const std::string samples[] = {"", "abc", "thiết kế", "🙂 xin chào", "각"};
  for (const auto& s : samples) CHECK(encode_utf8(decode_utf8(s)) == s);
}

TEST_CASE("utf8 rejects malformed bytes with replacement") {
  const std::string bad = "a\xC3(";  // truncated 2-byte sequence
  auto cps = decode_utf8(bad);
  REQUIRE(cps.size() == 3);
  CHECK(cps[0] == 'a');
  CHECK(cps[1] == 0xFFFD);
  CHECK(cps[2] == '(');
}

// Expected values below were produced by a standard Unicode NFC
// implementation and frozen here.
TEST_CASE("canonical composition") {
  CHECK(nfc_str("é") == "é");                    // e + acute -> é
  CHECK(nfc_str("ấbc") == "ấbc");           // a + circumflex + acute
  CHECK(nfc_str("ấ") == "ấ");                      // already composed
  CHECK(nfc_str("Å") == "Å");                // A + ring
  CHECK(nfc_str("x̧́y") == "x̧́y");      // no composite, order kept
  CHECK(nfc_str("각") == "각");          // Hangul LVT
  CHECK(nfc_str("") == "");
}

TEST_CASE("canonical reordering sorts combining classes") {
  // dot above (230) typed before dot below (220) must reorder
  CHECK(nfc_str("q̣̇") == nfc_str("q̣̇"));
}

TEST_CASE("nfc idempotent on fuzzed input") {
  hsd::Rng rng(1234);
  const uint32_t pool[] = {'a', 'e', 'o', 'u', 'A', 0x0301, 0x0300, 0x0302, 0x0323, 0x0309,
                           0x00EA, 0x1EA5, ' ', '!', 0x1F642, 0x200B, 0xAC00, 0x1100, 0x1161};
  for (int it = 0; it < 500; ++it) {
    std::vector<uint32_t> cps;
    const int len = 1 + static_cast<int>(rng.uniform_int(12));
    for (int i = 0; i < len; ++i) cps.push_back(pool[rng.uniform_int(std::size(pool))]);
    auto once = nfc(cps);
    auto twice = nfc(once);
    CHECK(once == twice);
  }
}

TEST_CASE("lowercase mapping") {
  CHECK(to_lower('A') == 'a');
  CHECK(to_lower(0x110) == 0x111);   // Đ -> đ
  CHECK(to_lower(0x1EB8) == 0x1EB9); // Ẹ -> ẹ
  CHECK(to_lower(0x130) == 'i');     // İ folds to plain i
  CHECK(to_lower('5') == '5');
  CHECK(to_lower(0x3A3) == 0x3C3);   // Σ -> σ
}

TEST_CASE("char classes") {
  CHECK(char_class('a') == CharClass::Letter);
  CHECK(char_class(0x1EBF) == CharClass::Letter);  // ế
  CHECK(char_class(0x0301) == CharClass::Mark);
  CHECK(char_class('7') == CharClass::Digit);
  CHECK(char_class(' ') == CharClass::Space);
  CHECK(char_class('\t') == CharClass::Space);
  CHECK(char_class('!') == CharClass::Other);
  CHECK(char_class(0x1F642) == CharClass::Other);  // emoji
}
