#include "hsd/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace hsd {

using nn::Mat;
using nn::Param;
using nn::SeqBatch;

Arch parse_arch(const std::string& s) {
  if (s == "textcnn") return Arch::TextCnn;
  if (s == "vdcnn") return Arch::Vdcnn;
  if (s == "bilstm" || s == "lstm") return Arch::BiLstm;
  if (s == "lstmcnn") return Arch::LstmCnn;
  if (s == "sarnn") return Arch::Sarnn;
  throw std::invalid_argument("unknown architecture: '" + s + "'");
}

const char* arch_name(Arch a) {
  switch (a) {
    case Arch::TextCnn: return "textcnn";
    case Arch::Vdcnn: return "vdcnn";
    case Arch::BiLstm: return "bilstm";
    case Arch::LstmCnn: return "lstmcnn";
    case Arch::Sarnn: return "sarnn";
  }
  return "?";
}

nlohmann::json ModelConfig::to_json() const {
  return {{"arch", arch_name(arch)},
          {"embedding_id", embedding_id},
          {"sentence_input", sentence_input},
          {"emb_dim", emb_dim},
          {"max_len", max_len},
          {"kernel_sizes", kernel_sizes},
          {"filters", filters},
          {"vdcnn_blocks", vdcnn_blocks},
          {"vdcnn_channels", vdcnn_channels},
          {"hidden", hidden},
          {"attn_dim", attn_dim},
          {"dense_hidden", dense_hidden},
          {"dropout", dropout},
          {"lr", lr},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.arch = parse_arch(j.at("arch").get<std::string>());
  c.embedding_id = j.value("embedding_id", "");
  c.sentence_input = j.at("sentence_input").get<bool>();
  c.emb_dim = j.at("emb_dim").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.kernel_sizes = j.at("kernel_sizes").get<std::vector<int>>();
  c.filters = j.at("filters").get<int>();
  c.vdcnn_blocks = j.at("vdcnn_blocks").get<int>();
  c.vdcnn_channels = j.at("vdcnn_channels").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.attn_dim = j.at("attn_dim").get<int>();
  c.dense_hidden = j.at("dense_hidden").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

// ------------------------------------------------------------------ loss ---

double weighted_ce_loss(const Mat& probs, const std::vector<ClassLabel>& labels,
                        const ClassWeights& w) {
  if (static_cast<size_t>(probs.rows) != labels.size()) {
    throw std::invalid_argument("weighted_ce_loss: probs/labels length mismatch");
  }
  if (labels.empty()) throw std::invalid_argument("weighted_ce_loss: empty batch");
  double sum = 0.0;
  for (int i = 0; i < probs.rows; ++i) {
    const int c = static_cast<int>(labels[i]);
    double p = probs.at(i, c);
    p = std::min(1.0, std::max(kProbClip, p));
    sum += w[c] * std::log(p);
  }
  return -sum / probs.rows;
}

double weighted_ce_loss(const std::vector<ProbabilityTriple>& probs,
                        const std::vector<ClassLabel>& labels, const ClassWeights& w) {
  Mat m(static_cast<int>(probs.size()), kNumClasses);
  for (size_t i = 0; i < probs.size(); ++i) {
    for (int c = 0; c < kNumClasses; ++c) m.at(static_cast<int>(i), c) = probs[i][c];
  }
  return weighted_ce_loss(m, labels, w);
}

Mat weighted_ce_dlogits(const Mat& probs, const std::vector<ClassLabel>& labels,
                        const ClassWeights& w) {
  Mat d(probs.rows, kNumClasses);
  const double inv_n = 1.0 / probs.rows;
  for (int i = 0; i < probs.rows; ++i) {
    const int c = static_cast<int>(labels[i]);
    if (probs.at(i, c) <= kProbClip) continue;  // clipped: flat in this sample
    const double scale = w[c] * inv_n;
    for (int j = 0; j < kNumClasses; ++j) {
      d.at(i, j) = scale * (probs.at(i, j) - (j == c ? 1.0 : 0.0));
    }
  }
  return d;
}

// ------------------------------------------------------------ Classifier ---

void Classifier::zero_grads() {
  for (Param* p : params()) std::fill(p->g.begin(), p->g.end(), 0.0);
}

std::vector<double> Classifier::save_params() const {
  auto* self = const_cast<Classifier*>(this);
  std::vector<double> flat;
  for (Param* p : self->params()) flat.insert(flat.end(), p->w.begin(), p->w.end());
  return flat;
}

void Classifier::load_params(const std::vector<double>& flat) {
  size_t off = 0;
  for (Param* p : params()) {
    if (off + p->size() > flat.size()) throw std::invalid_argument("load_params: size mismatch");
    std::copy(flat.begin() + off, flat.begin() + off + p->size(), p->w.begin());
    off += p->size();
  }
  if (off != flat.size()) throw std::invalid_argument("load_params: size mismatch");
}

size_t Classifier::param_count() const {
  auto* self = const_cast<Classifier*>(this);
  size_t total = 0;
  for (Param* p : self->params()) total += p->size();
  return total;
}

namespace {

Mat to_probs(Mat logits) {
  nn::softmax_rows(logits);
  return logits;
}

// --------------------------------------------------------------- TextCNN ---

class TextCnnModel : public Classifier {
 public:
  TextCnnModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    for (size_t i = 0; i < cfg.kernel_sizes.size(); ++i) {
      convs_.emplace_back("conv" + std::to_string(cfg.kernel_sizes[i]), cfg.emb_dim, cfg.filters,
                          cfg.kernel_sizes[i], rng);
    }
    relus_.resize(convs_.size());
    pools_.resize(convs_.size());
    const int concat = static_cast<int>(convs_.size()) * cfg.filters;
    d1_ = std::make_unique<nn::Dense>("fc1", concat, cfg.dense_hidden, rng);
    drop_ = std::make_unique<nn::Dropout>(cfg.dropout);
    d2_ = std::make_unique<nn::Dense>("fc2", cfg.dense_hidden, kNumClasses, rng);
  }

  Mat forward(const SeqBatch& x, bool train, Rng& rng) override {
    const int n = x.n;
    Mat concat(n, static_cast<int>(convs_.size()) * cfg_.filters);
    for (size_t i = 0; i < convs_.size(); ++i) {
      SeqBatch c, r;
      convs_[i].forward(x, c);
      relus_[i].forward(c, r);
      Mat pooled;
      pools_[i].forward(r, pooled);
      for (int s = 0; s < n; ++s) {
        std::memcpy(concat.row(s) + i * cfg_.filters, pooled.row(s),
                    sizeof(double) * cfg_.filters);
      }
    }
    Mat h1, h1r, h1d, logits;
    d1_->forward(concat, h1);
    relu1_.forward(h1, h1r);
    drop_->forward(h1r, h1d, train, rng);
    d2_->forward(h1d, logits);
    return to_probs(std::move(logits));
  }

  void backward(const Mat& dlogits) override {
    Mat dh1d, dh1r, dh1, dconcat;
    d2_->backward(dlogits, dh1d);
    drop_->backward(dh1d, dh1r);
    relu1_.backward(dh1r, dh1);
    d1_->backward(dh1, dconcat);
    for (size_t i = 0; i < convs_.size(); ++i) {
      Mat dpool(dconcat.rows, cfg_.filters);
      for (int s = 0; s < dconcat.rows; ++s) {
        std::memcpy(dpool.row(s), dconcat.row(s) + i * cfg_.filters,
                    sizeof(double) * cfg_.filters);
      }
      SeqBatch dr, dc, dx;
      pools_[i].backward(dpool, dr);
      relus_[i].backward(dr, dc);
      convs_[i].backward(dc, dx);
    }
  }

  std::vector<Param*> params() override {
    std::vector<Param*> out;
    for (auto& c : convs_) {
      out.push_back(&c.kern);
      out.push_back(&c.bias);
    }
    out.push_back(&d1_->w);
    out.push_back(&d1_->b);
    out.push_back(&d2_->w);
    out.push_back(&d2_->b);
    return out;
  }

 private:
  ModelConfig cfg_;
  std::vector<nn::Conv1d> convs_;
  std::vector<nn::SeqRelu> relus_;
  std::vector<nn::GlobalMaxPool> pools_;
  nn::Relu relu1_;
  std::unique_ptr<nn::Dense> d1_, d2_;
  std::unique_ptr<nn::Dropout> drop_;
};

// ----------------------------------------------------------------- VDCNN ---

class VdcnnModel : public Classifier {
 public:
  VdcnnModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    stem_ = std::make_unique<nn::Conv1dSame>("stem", cfg.emb_dim, cfg.vdcnn_channels, 3, rng);
    for (int b = 0; b < cfg.vdcnn_blocks; ++b) {
      blocks_.emplace_back("block" + std::to_string(b), cfg.vdcnn_channels, cfg.vdcnn_channels, 3,
                           rng);
    }
    d1_ = std::make_unique<nn::Dense>("fc1", cfg.vdcnn_channels, cfg.dense_hidden, rng);
    drop_ = std::make_unique<nn::Dropout>(cfg.dropout);
    d2_ = std::make_unique<nn::Dense>("fc2", cfg.dense_hidden, kNumClasses, rng);
  }

  Mat forward(const SeqBatch& x, bool train, Rng& rng) override {
    SeqBatch h, cur;
    stem_->forward(x, h);
    stem_relu_.forward(h, cur);
    for (auto& block : blocks_) {
      SeqBatch next;
      block.forward(cur, next);
      cur = std::move(next);
    }
    Mat pooled_vec, h1, h1r, h1d, logits;
    gpool_.forward(cur, pooled_vec);
    d1_->forward(pooled_vec, h1);
    relu1_.forward(h1, h1r);
    drop_->forward(h1r, h1d, train, rng);
    d2_->forward(h1d, logits);
    return to_probs(std::move(logits));
  }

  void backward(const Mat& dlogits) override {
    Mat dh1d, dh1r, dh1, dpool_vec;
    d2_->backward(dlogits, dh1d);
    drop_->backward(dh1d, dh1r);
    relu1_.backward(dh1r, dh1);
    d1_->backward(dh1, dpool_vec);
    SeqBatch dcur;
    gpool_.backward(dpool_vec, dcur);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
      SeqBatch dprev;
      it->backward(dcur, dprev);
      dcur = std::move(dprev);
    }
    SeqBatch dh, dx;
    stem_relu_.backward(dcur, dh);
    stem_->backward(dh, dx);
  }

  std::vector<Param*> params() override {
    std::vector<Param*> out{&stem_->kern, &stem_->bias};
    for (auto& b : blocks_) {
      for (Param* p : b.params()) out.push_back(p);
    }
    out.push_back(&d1_->w);
    out.push_back(&d1_->b);
    out.push_back(&d2_->w);
    out.push_back(&d2_->b);
    return out;
  }

 private:
  ModelConfig cfg_;
  std::unique_ptr<nn::Conv1dSame> stem_;
  nn::SeqRelu stem_relu_;
  std::vector<nn::ResidualConvBlock> blocks_;
  nn::GlobalMaxPool gpool_;
  nn::Relu relu1_;
  std::unique_ptr<nn::Dense> d1_, d2_;
  std::unique_ptr<nn::Dropout> drop_;
};

// ---------------------------------------------------------------- BiLSTM ---

class BiLstmModel : public Classifier {
 public:
  BiLstmModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    l1_ = std::make_unique<nn::BiLstm>("lstm1", cfg.emb_dim, cfg.hidden, rng);
    l2_ = std::make_unique<nn::BiLstm>("lstm2", 2 * cfg.hidden, cfg.hidden, rng);
    drop_ = std::make_unique<nn::Dropout>(cfg.dropout);
    out_ = std::make_unique<nn::Dense>("fc", 2 * cfg.hidden, kNumClasses, rng);
  }

  Mat forward(const SeqBatch& x, bool train, Rng& rng) override {
    SeqBatch h1, h2;
    l1_->forward(x, h1);
    l2_->forward(h1, h2);
    Mat pooled, pd, logits;
    pool_.forward(h2, pooled);
    drop_->forward(pooled, pd, train, rng);
    out_->forward(pd, logits);
    return to_probs(std::move(logits));
  }

  void backward(const Mat& dlogits) override {
    Mat dpd, dpooled;
    out_->backward(dlogits, dpd);
    drop_->backward(dpd, dpooled);
    SeqBatch dh2, dh1, dx;
    pool_.backward(dpooled, dh2);
    l2_->backward(dh2, dh1);
    l1_->backward(dh1, dx);
  }

  std::vector<Param*> params() override {
    std::vector<Param*> out;
    for (Param* p : l1_->params()) out.push_back(p);
    for (Param* p : l2_->params()) out.push_back(p);
    out.push_back(&out_->w);
    out.push_back(&out_->b);
    return out;
  }

 private:
  ModelConfig cfg_;
  std::unique_ptr<nn::BiLstm> l1_, l2_;
  nn::MaskedMeanPool pool_;
  std::unique_ptr<nn::Dropout> drop_;
  std::unique_ptr<nn::Dense> out_;
};

// --------------------------------------------------------------- LSTMCNN ---

class LstmCnnModel : public Classifier {
 public:
  LstmCnnModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    lstm_ = std::make_unique<nn::BiLstm>("lstm", cfg.emb_dim, cfg.hidden, rng);
    for (size_t i = 0; i < cfg.kernel_sizes.size(); ++i) {
      convs_.emplace_back("conv" + std::to_string(cfg.kernel_sizes[i]), 2 * cfg.hidden,
                          cfg.filters, cfg.kernel_sizes[i], rng);
    }
    relus_.resize(convs_.size());
    pools_.resize(convs_.size());
    const int concat = static_cast<int>(convs_.size()) * cfg.filters;
    d1_ = std::make_unique<nn::Dense>("fc1", concat, cfg.dense_hidden, rng);
    drop_ = std::make_unique<nn::Dropout>(cfg.dropout);
    d2_ = std::make_unique<nn::Dense>("fc2", cfg.dense_hidden, kNumClasses, rng);
  }

  Mat forward(const SeqBatch& x, bool train, Rng& rng) override {
    SeqBatch h;
    lstm_->forward(x, h);
    const int n = x.n;
    Mat concat(n, static_cast<int>(convs_.size()) * cfg_.filters);
    for (size_t i = 0; i < convs_.size(); ++i) {
      SeqBatch c, r;
      convs_[i].forward(h, c);
      relus_[i].forward(c, r);
      Mat pooled;
      pools_[i].forward(r, pooled);
      for (int s = 0; s < n; ++s) {
        std::memcpy(concat.row(s) + i * cfg_.filters, pooled.row(s),
                    sizeof(double) * cfg_.filters);
      }
    }
    Mat h1, h1r, h1d, logits;
    d1_->forward(concat, h1);
    relu1_.forward(h1, h1r);
    drop_->forward(h1r, h1d, train, rng);
    d2_->forward(h1d, logits);
    return to_probs(std::move(logits));
  }

  void backward(const Mat& dlogits) override {
    Mat dh1d, dh1r, dh1, dconcat;
    d2_->backward(dlogits, dh1d);
    drop_->backward(dh1d, dh1r);
    relu1_.backward(dh1r, dh1);
    d1_->backward(dh1, dconcat);
    SeqBatch dh;
    bool first = true;
    for (size_t i = 0; i < convs_.size(); ++i) {
      Mat dpool(dconcat.rows, cfg_.filters);
      for (int s = 0; s < dconcat.rows; ++s) {
        std::memcpy(dpool.row(s), dconcat.row(s) + i * cfg_.filters,
                    sizeof(double) * cfg_.filters);
      }
      SeqBatch dr, dc, dxi;
      pools_[i].backward(dpool, dr);
      relus_[i].backward(dr, dc);
      convs_[i].backward(dc, dxi);
      if (first) {
        dh = dxi;
        first = false;
      } else {
        for (size_t k = 0; k < dh.a.size(); ++k) dh.a[k] += dxi.a[k];
      }
    }
    SeqBatch dx;
    lstm_->backward(dh, dx);
  }

  std::vector<Param*> params() override {
    std::vector<Param*> out;
    for (Param* p : lstm_->params()) out.push_back(p);
    for (auto& c : convs_) {
      out.push_back(&c.kern);
      out.push_back(&c.bias);
    }
    out.push_back(&d1_->w);
    out.push_back(&d1_->b);
    out.push_back(&d2_->w);
    out.push_back(&d2_->b);
    return out;
  }

 private:
  ModelConfig cfg_;
  std::unique_ptr<nn::BiLstm> lstm_;
  std::vector<nn::Conv1d> convs_;
  std::vector<nn::SeqRelu> relus_;
  std::vector<nn::GlobalMaxPool> pools_;
  nn::Relu relu1_;
  std::unique_ptr<nn::Dense> d1_, d2_;
  std::unique_ptr<nn::Dropout> drop_;
};

// ----------------------------------------------------------------- SARNN ---

class SarnnModel : public Classifier {
 public:
  SarnnModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    l1_ = std::make_unique<nn::BiLstm>("lstm1", cfg.emb_dim, cfg.hidden, rng);
    attn_ = std::make_unique<nn::AdditiveAttention>("attn", 2 * cfg.hidden, cfg.attn_dim, rng);
    l2_ = std::make_unique<nn::BiLstm>("lstm2", 2 * cfg.hidden, cfg.hidden, rng);
    drop_ = std::make_unique<nn::Dropout>(cfg.dropout);
    out_ = std::make_unique<nn::Dense>("fc", 2 * cfg.hidden, kNumClasses, rng);
  }

  Mat forward(const SeqBatch& x, bool train, Rng& rng) override {
    SeqBatch h1, ha, h2;
    l1_->forward(x, h1);
    attn_->forward(h1, ha);
    l2_->forward(ha, h2);
    Mat pooled, pd, logits;
    pool_.forward(h2, pooled);
    drop_->forward(pooled, pd, train, rng);
    out_->forward(pd, logits);
    return to_probs(std::move(logits));
  }

  void backward(const Mat& dlogits) override {
    Mat dpd, dpooled;
    out_->backward(dlogits, dpd);
    drop_->backward(dpd, dpooled);
    SeqBatch dh2, dha, dh1, dx;
    pool_.backward(dpooled, dh2);
    l2_->backward(dh2, dha);
    attn_->backward(dha, dh1);
    l1_->backward(dh1, dx);
  }

  std::vector<Param*> params() override {
    std::vector<Param*> out;
    for (Param* p : l1_->params()) out.push_back(p);
    out.push_back(&attn_->w);
    out.push_back(&attn_->b);
    out.push_back(&attn_->v);
    for (Param* p : l2_->params()) out.push_back(p);
    out.push_back(&out_->w);
    out.push_back(&out_->b);
    return out;
  }

  const Mat* attention() const override { return &attn_->weights(); }

 private:
  ModelConfig cfg_;
  std::unique_ptr<nn::BiLstm> l1_, l2_;
  std::unique_ptr<nn::AdditiveAttention> attn_;
  nn::MaskedMeanPool pool_;
  std::unique_ptr<nn::Dropout> drop_;
  std::unique_ptr<nn::Dense> out_;
};

// ---------------------------------------------- sentence-vector adapter ---

// Sentence embeddings are a single vector per sample, so convolution and
// recurrence degenerate; every architecture id maps to this dense adapter.
class DenseAdapterModel : public Classifier {
 public:
  DenseAdapterModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    d1_ = std::make_unique<nn::Dense>("fc1", cfg.emb_dim, cfg.dense_hidden, rng);
    drop_ = std::make_unique<nn::Dropout>(cfg.dropout);
    d2_ = std::make_unique<nn::Dense>("fc2", cfg.dense_hidden, kNumClasses, rng);
  }

  Mat forward(const SeqBatch& x, bool train, Rng& rng) override {
    if (x.t != 1) throw std::invalid_argument("dense adapter expects sentence vectors");
    Mat flat(x.n, x.d);
    std::memcpy(flat.a.data(), x.a.data(), sizeof(double) * flat.a.size());
    Mat h1, h1r, h1d, logits;
    d1_->forward(flat, h1);
    relu_.forward(h1, h1r);
    drop_->forward(h1r, h1d, train, rng);
    d2_->forward(h1d, logits);
    return to_probs(std::move(logits));
  }

  void backward(const Mat& dlogits) override {
    Mat dh1d, dh1r, dh1, dflat;
    d2_->backward(dlogits, dh1d);
    drop_->backward(dh1d, dh1r);
    relu_.backward(dh1r, dh1);
    d1_->backward(dh1, dflat);
  }

  std::vector<Param*> params() override {
    return {&d1_->w, &d1_->b, &d2_->w, &d2_->b};
  }

 private:
  ModelConfig cfg_;
  std::unique_ptr<nn::Dense> d1_, d2_;
  nn::Relu relu_;
  std::unique_ptr<nn::Dropout> drop_;
};

}  // namespace

std::unique_ptr<Classifier> make_classifier(const ModelConfig& cfg) {
  Rng rng(cfg.seed);
  if (cfg.sentence_input) return std::make_unique<DenseAdapterModel>(cfg, rng);
  switch (cfg.arch) {
    case Arch::TextCnn: return std::make_unique<TextCnnModel>(cfg, rng);
    case Arch::Vdcnn: return std::make_unique<VdcnnModel>(cfg, rng);
    case Arch::BiLstm: return std::make_unique<BiLstmModel>(cfg, rng);
    case Arch::LstmCnn: return std::make_unique<LstmCnnModel>(cfg, rng);
    case Arch::Sarnn: return std::make_unique<SarnnModel>(cfg, rng);
  }
  throw std::logic_error("unreachable");
}

// ---------------------------------------------------------- EmbeddedData ---

EmbeddedData::EmbeddedData(std::vector<std::vector<int>> ids, const std::vector<float>* table,
                           int vocab, int dim, int max_len)
    : sentence_(false),
      count_(ids.size()),
      dim_(dim),
      max_len_(max_len),
      vocab_(vocab),
      ids_(std::move(ids)),
      table_(table) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
}

EmbeddedData::EmbeddedData(std::vector<std::vector<double>> sentence_vecs)
    : sentence_(true), count_(sentence_vecs.size()), vecs_(std::move(sentence_vecs)) {
  if (!vecs_.empty()) dim_ = static_cast<int>(vecs_[0].size());
}

SeqBatch EmbeddedData::batch(const std::vector<int>& idx) const {
  if (sentence_) {
    SeqBatch b(static_cast<int>(idx.size()), 1, dim_);
    for (size_t i = 0; i < idx.size(); ++i) {
      const auto& v = vecs_[idx[i]];
      std::copy(v.begin(), v.end(), b.step(static_cast<int>(i), 0));
    }
    return b;
  }
  SeqBatch b(static_cast<int>(idx.size()), max_len_, dim_);
  for (size_t i = 0; i < idx.size(); ++i) {
    const auto& seq = ids_[idx[i]];
    const int n_tok = std::min<int>(static_cast<int>(seq.size()), max_len_);
    b.len[i] = std::max(1, n_tok);
    for (int j = 0; j < n_tok; ++j) {
      const float* src = table_->data() + static_cast<size_t>(seq[j]) * dim_;
      double* dst = b.step(static_cast<int>(i), j);
      for (int d = 0; d < dim_; ++d) dst[d] = static_cast<double>(src[d]);
    }
  }
  return b;
}

// -------------------------------------------------------------- training ---

namespace {

std::vector<ClassLabel> gather(const std::vector<ClassLabel>& labels, const std::vector<int>& idx) {
  std::vector<ClassLabel> out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
  return out;
}

}  // namespace

nn::Mat predict_probs(Classifier& model, const EmbeddedData& data, int batch_size) {
  Rng dummy(0);
  Mat all(data.size(), kNumClasses);
  for (int start = 0; start < data.size(); start += batch_size) {
    const int end = std::min(data.size(), start + batch_size);
    std::vector<int> idx(end - start);
    for (int i = start; i < end; ++i) idx[i - start] = i;
    Mat probs = model.forward(data.batch(idx), false, dummy);
    for (int i = 0; i < probs.rows; ++i) {
      std::memcpy(all.row(start + i), probs.row(i), sizeof(double) * kNumClasses);
    }
  }
  return all;
}

TrainResult train_model(Classifier& model, const ModelConfig& cfg, const EmbeddedData& train,
                        const std::vector<ClassLabel>& train_labels, const EmbeddedData& dev,
                        const std::vector<ClassLabel>& dev_labels, const ClassWeights& w) {
  if (train.size() == 0 || dev.size() == 0) {
    throw std::invalid_argument("train_model: empty train or dev set");
  }
  w.validate();
  Rng shuffle_rng = Rng(cfg.seed).fork(101);
  Rng dropout_rng = Rng(cfg.seed).fork(102);
  nn::Adam adam(model.param_count(), cfg.lr);
  auto params = model.params();

  TrainResult res;
  res.best_dev_loss = std::numeric_limits<double>::infinity();
  std::vector<double> best_snapshot;
  int no_improve = 0;

  std::vector<int> order(train.size());
  for (int i = 0; i < train.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      SeqBatch x = train.batch(idx);
      std::vector<ClassLabel> y = gather(train_labels, idx);
      Mat probs = model.forward(x, true, dropout_rng);
      const double loss = weighted_ce_loss(probs, y, w);
      if (!std::isfinite(loss)) {
        throw std::runtime_error(std::string("training diverged (non-finite loss) arch=") +
                                 arch_name(cfg.arch) + " epoch=" + std::to_string(epoch) +
                                 " batch_start=" + std::to_string(start));
      }
      Mat dlogits = weighted_ce_dlogits(probs, y, w);
      model.zero_grads();
      model.backward(dlogits);
      adam.step(params);
    }
    Mat dev_probs = predict_probs(model, dev, std::max(cfg.batch_size, 64));
    const double dev_loss = weighted_ce_loss(dev_probs, dev_labels, w);
    if (!std::isfinite(dev_loss)) {
      throw std::runtime_error(std::string("training diverged (non-finite dev loss) arch=") +
                               arch_name(cfg.arch) + " epoch=" + std::to_string(epoch));
    }
    res.dev_loss_history.push_back(dev_loss);
    res.epochs_run = epoch;
    if (dev_loss < res.best_dev_loss) {
      res.best_dev_loss = dev_loss;
      res.best_epoch = epoch;
      best_snapshot = model.save_params();
      no_improve = 0;
    } else {
      ++no_improve;
      if (no_improve > cfg.patience) break;
    }
  }
  model.load_params(best_snapshot);
  res.dev_probs = predict_probs(model, dev, std::max(cfg.batch_size, 64));
  return res;
}

// ------------------------------------------------------------- snapshots ---

nlohmann::json model_snapshot(const Classifier& model, const ModelConfig& cfg,
                              double best_dev_loss) {
  auto* self = const_cast<Classifier*>(&model);
  nlohmann::json params = nlohmann::json::object();
  for (Param* p : self->params()) {
    params[p->name] = {{"shape", p->shape}, {"data", p->w}};
  }
  return {{"format", "hsd-model-v1"},
          {"config", cfg.to_json()},
          {"best_dev_loss", best_dev_loss},
          {"params", params}};
}

std::unique_ptr<Classifier> load_snapshot(const nlohmann::json& j, ModelConfig* cfg_out,
                                          double* best_dev_loss_out) {
  if (j.value("format", "") != "hsd-model-v1") {
    throw std::invalid_argument("not a model snapshot (format field mismatch)");
  }
  ModelConfig cfg = ModelConfig::from_json(j.at("config"));
  auto model = make_classifier(cfg);
  const auto& params = j.at("params");
  for (Param* p : model->params()) {
    if (!params.contains(p->name)) {
      throw std::invalid_argument("snapshot missing parameter " + p->name);
    }
    auto data = params.at(p->name).at("data").get<std::vector<double>>();
    if (data.size() != p->size()) {
      throw std::invalid_argument("snapshot parameter " + p->name + " has wrong size");
    }
    p->w = std::move(data);
  }
  if (cfg_out) *cfg_out = cfg;
  if (best_dev_loss_out) *best_dev_loss_out = j.value("best_dev_loss", 0.0);
  return model;
}

}  // namespace hsd
