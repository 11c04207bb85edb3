#pragma once

#include <string>
#include <vector>

#include "hsd/nn.hpp"
#include "hsd/rng.hpp"
#include "hsd/tokenize.hpp"

namespace hsd {

// Vocabulary-indexed dense vectors. Rows for the special tokens (pad, unk,
// mask) are all-zero; unk doubles as the OOV vector.
struct EmbeddingMatrix {
  Vocabulary vocab;
  int dim = 0;
  std::vector<float> vectors;  // vocab.size() x dim

  float* row(int index) { return vectors.data() + static_cast<size_t>(index) * dim; }
  const float* row(int index) const { return vectors.data() + static_cast<size_t>(index) * dim; }
  void validate() const;  // shape + finiteness
};

// word2vec text format ("count dim" header; one `token v1..vd` line per
// word). Specials are not stored in the file. Floats print with 9
// significant digits, which round-trips float32 exactly.
EmbeddingMatrix load_word2vec(const std::string& path);
void save_word2vec(const EmbeddingMatrix& m, const std::string& path);

// Token rows in order; unknown tokens take the unk row, short sequences pad
// with zero rows at the end, long ones truncate. Output is always
// (max_len x dim).
nn::Mat embed_sequence(const std::vector<std::string>& tokens, const EmbeddingMatrix& m,
                       int max_len);

struct CbowParams {
  int dim = 200;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  int min_count = 1;
  float lr = 0.025f;
  uint64_t seed = 1;
};

struct CbowResult {
  EmbeddingMatrix matrix;
  std::vector<double> epoch_loss;  // mean negative-sampling loss per epoch
};

// Continuous bag-of-words with negative sampling over pre-tokenized text.
CbowResult train_cbow(const std::vector<std::vector<std::string>>& corpus, const CbowParams& p);

}  // namespace hsd
