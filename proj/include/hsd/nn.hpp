#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hsd/rng.hpp"

namespace hsd::nn {

struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;
  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
};

// Batch of sequences: n samples, t steps, d features, with valid lengths.
// Positions at or past len[s] are zero.
struct SeqBatch {
  int n = 0, t = 0, d = 0;
  std::vector<double> a;
  std::vector<int> len;
  SeqBatch() = default;
  SeqBatch(int n_, int t_, int d_)
      : n(n_), t(t_), d(d_), a(static_cast<size_t>(n_) * t_ * d_, 0.0), len(n_, t_) {}
  double* step(int s, int st) { return a.data() + (static_cast<size_t>(s) * t + st) * d; }
  const double* step(int s, int st) const { return a.data() + (static_cast<size_t>(s) * t + st) * d; }
};

struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> w;
  std::vector<double> g;
  Param(std::string n, std::vector<int> sh) : name(std::move(n)), shape(std::move(sh)) {
    size_t total = 1;
    for (int s : shape) total *= static_cast<size_t>(s);
    w.assign(total, 0.0);
    g.assign(total, 0.0);
  }
  size_t size() const { return w.size(); }
};

// ---------------------------------------------------------------------------
// Layers. Each instance caches what its backward pass needs; backward
// accumulates into param gradients (call zero_grads between batches).
// ---------------------------------------------------------------------------

class Dense {
 public:
  Dense(std::string name, int in, int out, Rng& rng);
  void forward(const Mat& x, Mat& y);
  void backward(const Mat& dy, Mat& dx);
  Param w, b;
  int in_dim, out_dim;

 private:
  Mat x_;
};

class Relu {
 public:
  void forward(const Mat& x, Mat& y);
  void backward(const Mat& dy, Mat& dx);

 private:
  std::vector<uint8_t> mask_;
  int rows_ = 0, cols_ = 0;
};

class Dropout {
 public:
  explicit Dropout(double p) : p_(p) {}
  void forward(const Mat& x, Mat& y, bool train, Rng& rng);
  void backward(const Mat& dy, Mat& dx);

 private:
  double p_;
  std::vector<double> scale_;
  int rows_ = 0, cols_ = 0;
};

// Valid 1-D convolution over time; output length t-k+1, len' = max(1, len-k+1).
class Conv1d {
 public:
  Conv1d(std::string name, int in_ch, int out_ch, int ksize, Rng& rng);
  void forward(const SeqBatch& x, SeqBatch& y);
  void backward(const SeqBatch& dy, SeqBatch& dx);
  Param kern, bias;
  int in_ch_, out_ch_, k_;

 private:
  SeqBatch x_;
};

// Same-padded 1-D convolution (zero pad (k-1)/2 left, k/2 right); len preserved.
class Conv1dSame {
 public:
  Conv1dSame(std::string name, int in_ch, int out_ch, int ksize, Rng& rng);
  void forward(const SeqBatch& x, SeqBatch& y);
  void backward(const SeqBatch& dy, SeqBatch& dx);
  Param kern, bias;
  int in_ch_, out_ch_, k_;

 private:
  SeqBatch xpad_;
  int orig_t_ = 0;
  std::vector<int> orig_len_;
};

class SeqRelu {
 public:
  void forward(const SeqBatch& x, SeqBatch& y);
  void backward(const SeqBatch& dy, SeqBatch& dx);

 private:
  std::vector<uint8_t> mask_;
  int n_ = 0, t_ = 0, d_ = 0;
};

// Max over pairs of adjacent steps, stride 2; len' = max(1, ceil(len/2)).
class TimeMaxPool2 {
 public:
  void forward(const SeqBatch& x, SeqBatch& y);
  void backward(const SeqBatch& dy, SeqBatch& dx);

 private:
  std::vector<int> arg_;
  int n_ = 0, t_in_ = 0, t_out_ = 0, d_ = 0;
  std::vector<int> len_in_;
};

// Max over valid time steps -> Mat(n, d).
class GlobalMaxPool {
 public:
  void forward(const SeqBatch& x, Mat& y);
  void backward(const Mat& dy, SeqBatch& dx);

 private:
  std::vector<int> arg_;
  int n_ = 0, t_ = 0, d_ = 0;
  std::vector<int> len_;
};

// Mean over valid time steps -> Mat(n, d).
class MaskedMeanPool {
 public:
  void forward(const SeqBatch& x, Mat& y);
  void backward(const Mat& dy, SeqBatch& dx);

 private:
  int n_ = 0, t_ = 0, d_ = 0;
  std::vector<int> len_;
};

// Bidirectional LSTM; output is [forward ; backward] per step (2*hidden wide).
class BiLstm {
 public:
  BiLstm(std::string name, int in_dim, int hidden, Rng& rng);
  void forward(const SeqBatch& x, SeqBatch& y);
  void backward(const SeqBatch& dy, SeqBatch& dx);
  std::vector<Param*> params();
  // One direction's parameters: W (in+h x 4h), b (4h). Gate order: i f g o.
  Param wf, bf, wb, bb;
  int in_dim_, hidden_;

 private:
  struct DirCache;
  void run_dir(const SeqBatch& x, Param& w, Param& b, DirCache& cache, SeqBatch& out);
  void back_dir(const SeqBatch& dout, Param& w, Param& b, DirCache& cache, SeqBatch& dx_add);

  struct DirCache {
    SeqBatch x;          // input as seen by this direction
    std::vector<Mat> z;  // per step: n x 4h post-activation gates (i f g o)
    std::vector<Mat> c;  // per step cell state
    std::vector<Mat> h;  // per step hidden state
  };
  DirCache fwd_, bwd_;
};

// VDCNN-style residual unit: halve time by max pooling, then add a
// conv-relu-conv path on top of the pooled input (identity shortcut; a 1x1
// projection takes its place when the widths differ).
class ResidualConvBlock {
 public:
  ResidualConvBlock(std::string name, int in_ch, int out_ch, int ksize, Rng& rng);
  void forward(const SeqBatch& x, SeqBatch& y);
  void backward(const SeqBatch& dy, SeqBatch& dx);
  std::vector<Param*> params();
  Conv1dSame conv1, conv2;

 private:
  TimeMaxPool2 pool_;
  SeqRelu relu_;
  std::unique_ptr<Conv1dSame> proj_;  // only when in_ch != out_ch
};

// Additive self-attention: alpha = softmax_t(v . tanh(W h_t + b)) over valid
// steps; output y_t = alpha_t * h_t (same shape as input).
class AdditiveAttention {
 public:
  AdditiveAttention(std::string name, int in_dim, int attn_dim, Rng& rng);
  void forward(const SeqBatch& h, SeqBatch& y);
  void backward(const SeqBatch& dy, SeqBatch& dh);
  const Mat& weights() const { return alpha_; }  // n x t
  Param w, b, v;
  int in_dim_, attn_dim_;

 private:
  SeqBatch h_;
  SeqBatch tanh_u_;  // n x t x attn_dim
  Mat alpha_;
};

// Adam with bias correction over a fixed parameter list.
class Adam {
 public:
  Adam(size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}
  void step(const std::vector<Param*>& params);

 private:
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
  std::vector<double> m_, v_;
};

// Helpers shared by layers and models.
void glorot_init(Param& p, int fan_in, int fan_out, Rng& rng);
void softmax_rows(Mat& m);

}  // namespace hsd::nn
