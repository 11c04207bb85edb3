#include "hsd/tokenize.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hsd/unicode.hpp"

namespace hsd {

namespace {
constexpr const char* kEow = "</w>";
}

static std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// -------------------------------------------------------------- Vocabulary ---

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kUnkToken);
  add(kMaskToken);
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int idx = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, idx);
  return idx;
}

int Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) != 0; }

const std::string& Vocabulary::token(int index) const {
  if (index < 0 || index >= size()) throw std::out_of_range("vocabulary index out of range");
  return tokens_[index];
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus, int min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  std::map<std::string, long> freq;
  for (const auto& sent : corpus) {
    for (const auto& tok : sent) ++freq[tok];
  }
  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, n] : freq) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [tok, n] : kept) v.add(tok);
  return v;
}

// ------------------------------------------------------------- tokenizers ---

TokenizerKind parse_tokenizer(const std::string& s) {
  if (s == "space") return TokenizerKind::Space;
  if (s == "bpe") return TokenizerKind::Bpe;
  if (s == "segmented") return TokenizerKind::Segmented;
  throw std::invalid_argument("unknown tokenizer kind: '" + s + "'");
}

const char* tokenizer_name(TokenizerKind k) {
  switch (k) {
    case TokenizerKind::Space: return "space";
    case TokenizerKind::Bpe: return "bpe";
    case TokenizerKind::Segmented: return "segmented";
  }
  return "?";
}

std::vector<std::string> tokenize_space(std::string_view text) {
  std::vector<std::string> out;
  std::vector<uint32_t> cps = uni::decode_utf8(text);
  std::string cur;
  for (uint32_t cp : cps) {
    if (uni::is_space(cp)) {
      if (!cur.empty()) {
        out.push_back(std::move(cur));
        cur.clear();
      }
    } else {
      uni::append_utf8(cur, cp);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// -------------------------------------------------------------------- BPE ---

void BpeMergeTable::add(const std::string& first, const std::string& second) {
  const auto key = std::make_pair(first, second);
  if (rank_.count(key)) throw std::invalid_argument("duplicate merge pair: " + first + " " + second);
  rank_[key] = static_cast<int>(merges_.size());
  merges_.emplace_back(first, second);
}

int BpeMergeTable::rank(const std::string& first, const std::string& second) const {
  auto it = rank_.find(std::make_pair(first, second));
  return it == rank_.end() ? -1 : it->second;
}

BpeMergeTable BpeMergeTable::load(const std::string& path) {
  BpeMergeTable t;
  size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size()) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected 'first second'");
    }
    t.add(line.substr(0, sp), line.substr(sp + 1));
  }
  return t;
}

void BpeMergeTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write merge table: " + path);
  for (const auto& [a, b] : merges_) out << a << ' ' << b << '\n';
}

namespace {

std::vector<std::string> word_symbols(const std::string& word) {
  std::vector<std::string> syms;
  for (uint32_t cp : uni::decode_utf8(word)) {
    std::string s;
    uni::append_utf8(s, cp);
    syms.push_back(std::move(s));
  }
  if (!syms.empty()) syms.back() += kEow;
  return syms;
}

std::string strip_eow(const std::string& sym) {
  if (sym.size() >= 4 && sym.compare(sym.size() - 4, 4, kEow) == 0) {
    return sym.substr(0, sym.size() - 4);
  }
  return sym;
}

void merge_in_place(std::vector<std::string>& syms, const std::string& a, const std::string& b) {
  std::vector<std::string> out;
  out.reserve(syms.size());
  size_t i = 0;
  while (i < syms.size()) {
    if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
      out.push_back(a + b);
      i += 2;
    } else {
      out.push_back(syms[i]);
      ++i;
    }
  }
  syms = std::move(out);
}

}  // namespace

BpeMergeTable learn_bpe(const std::vector<std::vector<std::string>>& corpus, int n_merges) {
  if (n_merges < 0) throw std::invalid_argument("n_merges must be >= 0");
  std::map<std::string, long> word_freq;
  for (const auto& sent : corpus) {
    for (const auto& w : sent) {
      if (!w.empty()) ++word_freq[w];
    }
  }
  if (word_freq.empty()) throw std::invalid_argument("learn_bpe: empty corpus");

  std::vector<std::pair<std::vector<std::string>, long>> words;
  words.reserve(word_freq.size());
  for (const auto& [w, n] : word_freq) words.emplace_back(word_symbols(w), n);

  BpeMergeTable table;
  for (int step = 0; step < n_merges; ++step) {
    std::map<std::pair<std::string, std::string>, long> pair_count;
    for (const auto& [syms, n] : words) {
      for (size_t i = 0; i + 1 < syms.size(); ++i) {
        pair_count[std::make_pair(syms[i], syms[i + 1])] += n;
      }
    }
    if (pair_count.empty()) break;
    // max count, ties to the lexicographically smallest pair (map order)
    auto best = pair_count.begin();
    for (auto it = pair_count.begin(); it != pair_count.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [a, b] = best->first;
    table.add(a, b);
    for (auto& [syms, n] : words) merge_in_place(syms, a, b);
  }
  return table;
}

std::vector<std::string> bpe_segment_word(const std::string& word, const BpeMergeTable& merges) {
  std::vector<std::string> syms = word_symbols(word);
  while (syms.size() > 1) {
    int best_rank = -1;
    size_t best_i = 0;
    for (size_t i = 0; i + 1 < syms.size(); ++i) {
      const int r = merges.rank(syms[i], syms[i + 1]);
      if (r >= 0 && (best_rank < 0 || r < best_rank)) {
        best_rank = r;
        best_i = i;
      }
    }
    if (best_rank < 0) break;
    const std::string a = syms[best_i], b = syms[best_i + 1];
    merge_in_place(syms, a, b);
  }
  std::vector<std::string> out;
  out.reserve(syms.size());
  for (const auto& s : syms) out.push_back(strip_eow(s));
  return out;
}

std::vector<std::string> tokenize_bpe(std::string_view text, const BpeMergeTable& merges) {
  std::vector<std::string> out;
  for (const auto& w : tokenize_space(text)) {
    for (auto& piece : bpe_segment_word(w, merges)) out.push_back(std::move(piece));
  }
  return out;
}

// --------------------------------------------------------- word segmenter ---

void SegmenterLexicon::add(const std::vector<std::string>& syllables) {
  if (syllables.empty()) return;
  if (!words_.count(syllables)) ++count_;
  words_[syllables] = true;
  max_len_ = std::max(max_len_, syllables.size());
}

bool SegmenterLexicon::contains(const std::vector<std::string>& syllables) const {
  return words_.count(syllables) != 0;
}

SegmenterLexicon SegmenterLexicon::load(const std::string& path) {
  SegmenterLexicon lex;
  for (const auto& line : read_lines(path)) {
    if (line.empty() || line[0] == '#') continue;
    lex.add(tokenize_space(line));
  }
  return lex;
}

std::vector<std::string> tokenize_segmented(std::string_view text, const SegmenterLexicon& lexicon) {
  const std::vector<std::string> syll = tokenize_space(text);
  std::vector<std::string> out;
  size_t i = 0;
  while (i < syll.size()) {
    size_t matched = 0;
    const size_t longest = std::min(lexicon.max_syllables(), syll.size() - i);
    for (size_t len = longest; len >= 2; --len) {
      std::vector<std::string> cand(syll.begin() + i, syll.begin() + i + len);
      if (lexicon.contains(cand)) {
        matched = len;
        break;
      }
    }
    if (matched) {
      std::string joined = syll[i];
      for (size_t k = 1; k < matched; ++k) joined += "_" + syll[i + k];
      out.push_back(std::move(joined));
      i += matched;
    } else {
      out.push_back(syll[i]);
      ++i;
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text, TokenizerKind kind,
                                  const TokenizerResources& res) {
  switch (kind) {
    case TokenizerKind::Space:
      return tokenize_space(text);
    case TokenizerKind::Bpe:
      if (!res.merges) throw std::invalid_argument("bpe tokenizer requires a merge table");
      return tokenize_bpe(text, *res.merges);
    case TokenizerKind::Segmented:
      if (!res.lexicon) throw std::invalid_argument("segmented tokenizer requires a lexicon");
      return tokenize_segmented(text, *res.lexicon);
  }
  throw std::logic_error("unreachable");
}

}  // namespace hsd
