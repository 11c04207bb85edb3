#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hsd/nn.hpp"
#include "hsd/rng.hpp"
#include "hsd/tokenize.hpp"

namespace hsd {

struct MlmConfig {
  int dim = 256;
  int layers = 2;
  int heads = 4;
  int ff_dim = 512;
  int max_len = 64;
  double mask_frac = 0.15;
  double lr = 5e-4;
  int batch_size = 16;
  int epochs = 2;
  double holdout_frac = 0.1;
  uint64_t seed = 1;

  nlohmann::json to_json() const;
  static MlmConfig from_json(const nlohmann::json& j);
};

// Small transformer encoder trained by masked-token prediction. Doubles as
// the sentence embedder (mean-pooled final states) and as the proposal
// model for masked-word augmentation.
class SentenceEncoder {
 public:
  SentenceEncoder(Vocabulary vocab, MlmConfig cfg);

  struct TrainStats {
    double initial_holdout_loss = 0.0;
    double final_holdout_loss = 0.0;
    std::vector<double> epoch_loss;
  };
  TrainStats train(const std::vector<std::vector<std::string>>& corpus);

  // Mean-pooled final hidden states; always cfg.dim long.
  std::vector<double> encode(const std::vector<std::string>& tokens) const;

  // Top-k vocabulary tokens (specials excluded) by predicted probability at
  // the masked position, probability-descending.
  std::vector<std::pair<std::string, double>> propose_masked(const std::vector<std::string>& tokens,
                                                             int position, int top_k) const;

  const Vocabulary& vocab() const { return vocab_; }
  const MlmConfig& config() const { return cfg_; }

  nlohmann::json to_json() const;
  static SentenceEncoder from_json(const nlohmann::json& j);

  // Masked cross-entropy on a token-id corpus with a fixed masking stream.
  double masked_loss(const std::vector<std::vector<int>>& ids, uint64_t mask_seed);

 private:
  struct Batch;
  struct Caches;

  std::vector<int> to_ids(const std::vector<std::string>& tokens) const;
  nn::Mat forward(const Batch& batch, Caches* caches) const;
  void backward(const Batch& batch, const nn::Mat& dx_out, Caches& caches);
  std::vector<nn::Param*> params();

  Vocabulary vocab_;
  MlmConfig cfg_;
  nn::Param tok_emb_, pos_emb_;
  struct Layer {
    nn::Param wq, bq, wk, bk, wv, bv, wo, bo;
    nn::Param ln1_g, ln1_b, ln2_g, ln2_b;
    nn::Param w1, b1, w2, b2;
    Layer(const std::string& prefix, int dim, int ff, Rng& rng);
  };
  std::vector<Layer> layers_;
  nn::Param out_w_, out_b_;
};

}  // namespace hsd
