#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace hsd::textnorm {

// Ordered emoticon dictionary: multi-character sequence -> one codepoint.
// Replacement is a single longest-match left-to-right scan.
class EmoticonDictionary {
 public:
  EmoticonDictionary() = default;

  // key must be at least 2 characters; value must be a single codepoint.
  void add(const std::string& key, const std::string& value);
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // File format: `key<TAB>value` per line, '#' starts a comment line.
  static EmoticonDictionary load(const std::string& path);
  static EmoticonDictionary parse(std::string_view content, const std::string& origin);
  // Dictionary the pipeline ships with (~30 common ASCII emoticons).
  static EmoticonDictionary builtin();

  const std::map<std::vector<uint32_t>, uint32_t>& entries() const { return entries_; }
  size_t max_key_len() const { return max_key_len_; }

 private:
  std::map<std::vector<uint32_t>, uint32_t> entries_;
  size_t max_key_len_ = 0;
};

struct NormalizationConfig {
  std::set<uint32_t> invisible_charset;
  EmoticonDictionary emoticons;
  bool separate_punct = true;

  // Control characters (minus tab/newline), zero-width characters, BOM and
  // soft hyphen; the shipped emoticon dictionary.
  static NormalizationConfig defaults();
};

// Step 1: canonical composition plus Vietnamese tone-mark re-placement.
std::string normalize_encoding(std::string_view text);

// Step 2: longest-match replacement of emoticon sequences.
std::string canonicalize_emoticons(std::string_view text, const EmoticonDictionary& dict);

// Step 3: drop invisible codepoints; optionally space out punctuation/emoji
// from letter runs; whitespace runs collapse to single spaces.
std::string strip_invisible(std::string_view text, const NormalizationConfig& config);

// Step 5: Unicode-aware lowercasing.
std::string lowercase(std::string_view text);

// The full pipeline, steps 1 -> 2 -> 3 -> 5. Idempotent.
std::string clean(std::string_view text, const NormalizationConfig& config);

}  // namespace hsd::textnorm
