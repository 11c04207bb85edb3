#include "hsd/augment.hpp"

#include <algorithm>
#include <stdexcept>

#include "hsd/rng.hpp"

namespace hsd {

CommonWordSet select_common_words(const std::vector<TokenizedSample>& dataset, int min_per_class) {
  if (min_per_class < 1) throw std::invalid_argument("min_per_class must be >= 1");
  std::array<bool, kNumClasses> seen{};
  CommonWordSet out;
  out.min_per_class = min_per_class;
  for (const auto& [tokens, label] : dataset) {
    seen[static_cast<int>(label)] = true;
    for (const auto& tok : tokens) {
      ++out.per_class_counts[tok][static_cast<int>(label)];
    }
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (!seen[c]) {
      throw std::invalid_argument(std::string("class absent from dataset: ") +
                                  class_name(static_cast<ClassLabel>(c)));
    }
  }
  for (const auto& [tok, counts] : out.per_class_counts) {
    bool ok = true;
    for (int c = 0; c < kNumClasses; ++c) ok = ok && counts[c] >= min_per_class;
    if (ok) out.words.insert(tok);
  }
  return out;
}

std::vector<AugmentedSample> augment_sentence(const std::vector<std::string>& tokens,
                                              ClassLabel label, const SentenceEncoder& encoder,
                                              const CommonWordSet& common, int n_positions,
                                              int n_outputs, uint64_t seed) {
  if (common.words.empty()) throw std::invalid_argument("augment: empty common word set");
  if (n_positions < 1 || n_positions > static_cast<int>(tokens.size())) {
    throw std::invalid_argument("augment: n_positions must be in [1, sentence length]");
  }
  if (n_outputs < 0) throw std::invalid_argument("augment: n_outputs must be >= 0");

  const int n_tokens = static_cast<int>(tokens.size());
  const int proposals_wanted = std::max(1, encoder.vocab().size() - Vocabulary::kNumSpecials);

  std::vector<AugmentedSample> outputs;
  outputs.reserve(n_outputs);
  Rng base(seed);
  for (int k = 0; k < n_outputs; ++k) {
    Rng rng = base.fork(k);
    std::set<int> positions;
    while (static_cast<int>(positions.size()) < n_positions) {
      positions.insert(static_cast<int>(rng.uniform_int(n_tokens)));
    }
    AugmentedSample sample;
    sample.tokens = tokens;
    sample.label = label;
    for (int pos : positions) {
      const std::string& original = tokens[pos];
      for (const auto& [cand, prob] : encoder.propose_masked(sample.tokens, pos, proposals_wanted)) {
        if (cand != original && common.words.count(cand)) {
          sample.tokens[pos] = cand;
          sample.replaced_positions.insert(pos);
          break;
        }
      }
    }
    outputs.push_back(std::move(sample));
  }
  return outputs;
}

}  // namespace hsd
