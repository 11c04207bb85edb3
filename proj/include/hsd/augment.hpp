#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hsd/mlm.hpp"
#include "hsd/types.hpp"

namespace hsd {

// Tokens frequent in all three classes; substitution candidates that keep
// augmented sentences close to the source distribution.
struct CommonWordSet {
  std::set<std::string> words;
  std::map<std::string, std::array<long, kNumClasses>> per_class_counts;
  int min_per_class = 0;
};

using TokenizedSample = std::pair<std::vector<std::string>, ClassLabel>;

// Tokens occurring at least min_per_class times in each class. The dataset
// must contain all three labels.
CommonWordSet select_common_words(const std::vector<TokenizedSample>& dataset, int min_per_class);

struct AugmentedSample {
  std::vector<std::string> tokens;
  std::set<int> replaced_positions;
  ClassLabel label;
};

// Per output: sample n_positions distinct positions, mask each, substitute
// the highest-ranked encoder proposal that is in the common set and differs
// from the original token (falling back to the original when none exists).
std::vector<AugmentedSample> augment_sentence(const std::vector<std::string>& tokens,
                                              ClassLabel label, const SentenceEncoder& encoder,
                                              const CommonWordSet& common, int n_positions,
                                              int n_outputs, uint64_t seed);

}  // namespace hsd
