#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsd/nn.hpp"
#include "hsd/rng.hpp"
#include "hsd/types.hpp"

namespace hsd {

enum class Arch { TextCnn, Vdcnn, BiLstm, LstmCnn, Sarnn };

Arch parse_arch(const std::string& s);
const char* arch_name(Arch a);

// Hyperparameters shared by the five architectures. Values not dictated by
// the task are defaults recorded here so runs are reproducible.
struct ModelConfig {
  Arch arch = Arch::TextCnn;
  std::string embedding_id;
  // sequence input: (max_len, emb_dim); sentence input: single emb_dim vector
  bool sentence_input = false;
  int emb_dim = 200;
  int max_len = 64;

  std::vector<int> kernel_sizes{2, 3, 4, 5};
  int filters = 64;
  int vdcnn_blocks = 4;
  int vdcnn_channels = 64;
  int hidden = 128;       // recurrent hidden size per direction
  int attn_dim = 64;
  int dense_hidden = 128;
  double dropout = 0.3;

  double lr = 1e-3;
  int batch_size = 32;
  int max_epochs = 30;
  int patience = 5;
  uint64_t seed = 1;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// A classifier: embedded input batch -> per-row probability triple.
class Classifier {
 public:
  virtual ~Classifier() = default;
  // Returns an n x 3 matrix of class probabilities (softmax output).
  virtual nn::Mat forward(const nn::SeqBatch& x, bool train, Rng& rng) = 0;
  // dlogits is the gradient at the pre-softmax logits (n x 3).
  virtual void backward(const nn::Mat& dlogits) = 0;
  virtual std::vector<nn::Param*> params() = 0;
  // Attention weights from the last forward pass, when the architecture has
  // an attention block (n x t rows summing to 1 over valid steps).
  virtual const nn::Mat* attention() const { return nullptr; }
  void zero_grads();
  std::vector<double> save_params() const;
  void load_params(const std::vector<double>& flat);
  size_t param_count() const;
};

std::unique_ptr<Classifier> make_classifier(const ModelConfig& cfg);

// Eq-style weighted cross entropy: J = -(1/N) sum_i w_{class(i)} log(p_i[label_i]),
// probabilities clipped to [1e-7, 1] before the log.
double weighted_ce_loss(const std::vector<ProbabilityTriple>& probs,
                        const std::vector<ClassLabel>& labels, const ClassWeights& w);
double weighted_ce_loss(const nn::Mat& probs, const std::vector<ClassLabel>& labels,
                        const ClassWeights& w);
// Gradient at the logits of softmax followed by the loss above.
nn::Mat weighted_ce_dlogits(const nn::Mat& probs, const std::vector<ClassLabel>& labels,
                            const ClassWeights& w);

constexpr double kProbClip = 1e-7;

// Feed for training/inference: either token-id sequences embedded on the fly
// or precomputed sentence vectors.
class EmbeddedData {
 public:
  // sequence mode: ids[i] are token indices into a (vocab x dim) float table
  EmbeddedData(std::vector<std::vector<int>> ids, const std::vector<float>* table, int vocab,
               int dim, int max_len);
  // sentence mode: one dim-vector per sample
  explicit EmbeddedData(std::vector<std::vector<double>> sentence_vecs);

  int size() const { return static_cast<int>(count_); }
  int dim() const { return dim_; }
  int max_len() const { return max_len_; }
  bool sentence_mode() const { return sentence_; }
  nn::SeqBatch batch(const std::vector<int>& idx) const;

 private:
  bool sentence_ = false;
  size_t count_ = 0;
  int dim_ = 0, max_len_ = 1, vocab_ = 0;
  std::vector<std::vector<int>> ids_;
  const std::vector<float>* table_ = nullptr;
  std::vector<std::vector<double>> vecs_;
};

struct TrainResult {
  double best_dev_loss = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
  std::vector<double> dev_loss_history;
  nn::Mat dev_probs;  // from the best snapshot
};

// Mini-batch Adam on the weighted loss; snapshots parameters at the best dev
// loss and restores them into the model before returning.
TrainResult train_model(Classifier& model, const ModelConfig& cfg, const EmbeddedData& train,
                        const std::vector<ClassLabel>& train_labels, const EmbeddedData& dev,
                        const std::vector<ClassLabel>& dev_labels, const ClassWeights& w);

nn::Mat predict_probs(Classifier& model, const EmbeddedData& data, int batch_size = 64);

// Snapshot container: config + parameter tensors + best dev loss.
nlohmann::json model_snapshot(const Classifier& model, const ModelConfig& cfg,
                              double best_dev_loss);
std::unique_ptr<Classifier> load_snapshot(const nlohmann::json& j, ModelConfig* cfg_out = nullptr,
                                          double* best_dev_loss_out = nullptr);

}  // namespace hsd
