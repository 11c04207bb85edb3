#pragma once

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hsd {

// Token index map with fixed specials. Indices are contiguous; non-special
// tokens are ordered by descending corpus frequency, ties lexicographic.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kMask = 2;
  static constexpr int kNumSpecials = 3;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";
  static constexpr const char* kMaskToken = "<mask>";

  Vocabulary();

  int add(const std::string& token);  // appends if missing, returns index
  int index(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  const std::string& token(int index) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus, int min_count);

  std::vector<std::string> tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

enum class TokenizerKind { Space, Bpe, Segmented };

TokenizerKind parse_tokenizer(const std::string& s);
const char* tokenizer_name(TokenizerKind k);

// Whitespace-run split.
std::vector<std::string> tokenize_space(std::string_view text);

// ------------------------------------------------------------------- BPE ---

// Learned subword merges in priority order. Symbols use the end-of-word
// marker "</w>" on a word's final character while merging; emitted tokens
// have the marker stripped.
class BpeMergeTable {
 public:
  void add(const std::string& first, const std::string& second);
  size_t size() const { return merges_.size(); }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  int rank(const std::string& first, const std::string& second) const;  // -1 if absent

  // One space-separated pair per line, priority order.
  static BpeMergeTable load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> merges_;
  std::map<std::pair<std::string, std::string>, int> rank_;
};

// Pair-frequency merge learning; ties broken toward the lexicographically
// smallest pair. Corpus entries are pre-split words.
BpeMergeTable learn_bpe(const std::vector<std::vector<std::string>>& corpus, int n_merges);

std::vector<std::string> bpe_segment_word(const std::string& word, const BpeMergeTable& merges);
std::vector<std::string> tokenize_bpe(std::string_view text, const BpeMergeTable& merges);

// -------------------------------------------------------- word segmenter ---

// Greedy longest-match against a multi-syllable word lexicon; matched words
// join their syllables with '_'. Replaces the external segmenter toolchain
// the original pipeline shells out to.
class SegmenterLexicon {
 public:
  void add(const std::vector<std::string>& syllables);
  size_t size() const { return count_; }
  size_t max_syllables() const { return max_len_; }
  bool contains(const std::vector<std::string>& syllables) const;

  // One word per line, syllables space-separated.
  static SegmenterLexicon load(const std::string& path);

 private:
  std::map<std::vector<std::string>, bool> words_;
  size_t count_ = 0;
  size_t max_len_ = 1;
};

std::vector<std::string> tokenize_segmented(std::string_view text, const SegmenterLexicon& lexicon);

// Dispatch over the three schemes. bpe/segmented require their resource.
struct TokenizerResources {
  const BpeMergeTable* merges = nullptr;
  const SegmenterLexicon* lexicon = nullptr;
};

std::vector<std::string> tokenize(std::string_view text, TokenizerKind kind,
                                  const TokenizerResources& res = {});

}  // namespace hsd
