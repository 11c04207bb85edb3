#include "hsd/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "hsd/kernels.hpp"

namespace hsd::nn {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

void Adam::step(const std::vector<Param*>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  size_t off = 0;
  for (Param* p : params) {
    for (size_t i = 0; i < p->size(); ++i, ++off) {
      const double g = p->g[i];
      m_[off] = beta1_ * m_[off] + (1.0 - beta1_) * g;
      v_[off] = beta2_ * v_[off] + (1.0 - beta2_) * g * g;
      p->w[i] -= lr_ * (m_[off] / bc1) / (std::sqrt(v_[off] / bc2) + eps_);
    }
  }
}

void glorot_init(Param& p, int fan_in, int fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : p.w) v = rng.uniform(-limit, limit);
}

void softmax_rows(Mat& m) {
  for (int r = 0; r < m.rows; ++r) {
    double* row = m.row(r);
    double mx = row[0];
    for (int c = 1; c < m.cols; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (int c = 0; c < m.cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (int c = 0; c < m.cols; ++c) row[c] /= sum;
  }
}

// ----------------------------------------------------------------- Dense ---

Dense::Dense(std::string name, int in, int out, Rng& rng)
    : w(name + ".w", {in, out}), b(name + ".b", {out}), in_dim(in), out_dim(out) {
  glorot_init(w, in, out, rng);
}

void Dense::forward(const Mat& x, Mat& y) {
  x_ = x;
  y = Mat(x.rows, out_dim);
  kernels::matmul_bias(x.a.data(), w.w.data(), b.w.data(), y.a.data(), x.rows, in_dim, out_dim);
}

void Dense::backward(const Mat& dy, Mat& dx) {
  std::vector<double> dw(w.size());
  kernels::matmul_at_b(x_.a.data(), dy.a.data(), dw.data(), x_.rows, in_dim, out_dim);
  add_into(w.g, dw);
  for (int r = 0; r < dy.rows; ++r) {
    const double* row = dy.row(r);
    for (int c = 0; c < out_dim; ++c) b.g[c] += row[c];
  }
  dx = Mat(x_.rows, in_dim);
  kernels::matmul_a_bt(dy.a.data(), w.w.data(), dx.a.data(), dy.rows, out_dim, in_dim);
}

// ------------------------------------------------------------------ Relu ---

void Relu::forward(const Mat& x, Mat& y) {
  rows_ = x.rows;
  cols_ = x.cols;
  y = x;
  mask_.assign(x.a.size(), 0);
  for (size_t i = 0; i < x.a.size(); ++i) {
    if (x.a[i] > 0.0) {
      mask_[i] = 1;
    } else {
      y.a[i] = 0.0;
    }
  }
}

void Relu::backward(const Mat& dy, Mat& dx) {
  dx = Mat(rows_, cols_);
  for (size_t i = 0; i < dy.a.size(); ++i) dx.a[i] = mask_[i] ? dy.a[i] : 0.0;
}

// --------------------------------------------------------------- Dropout ---

void Dropout::forward(const Mat& x, Mat& y, bool train, Rng& rng) {
  rows_ = x.rows;
  cols_ = x.cols;
  y = x;
  if (!train || p_ <= 0.0) {
    scale_.clear();
    return;
  }
  scale_.resize(x.a.size());
  const double keep = 1.0 - p_;
  for (size_t i = 0; i < x.a.size(); ++i) {
    scale_[i] = (rng.uniform() < p_) ? 0.0 : 1.0 / keep;
    y.a[i] *= scale_[i];
  }
}

void Dropout::backward(const Mat& dy, Mat& dx) {
  dx = dy;
  if (scale_.empty()) return;
  for (size_t i = 0; i < dx.a.size(); ++i) dx.a[i] *= scale_[i];
}

// ---------------------------------------------------------------- Conv1d ---

Conv1d::Conv1d(std::string name, int in_ch, int out_ch, int ksize, Rng& rng)
    : kern(name + ".kern", {out_ch, ksize, in_ch}),
      bias(name + ".bias", {out_ch}),
      in_ch_(in_ch),
      out_ch_(out_ch),
      k_(ksize) {
  glorot_init(kern, ksize * in_ch, ksize * out_ch, rng);
}

void Conv1d::forward(const SeqBatch& x, SeqBatch& y) {
  if (x.t < k_) throw std::invalid_argument("conv1d: sequence length " + std::to_string(x.t) +
                                            " shorter than kernel " + std::to_string(k_));
  x_ = x;
  y = SeqBatch(x.n, x.t - k_ + 1, out_ch_);
  kernels::conv1d_valid(x.a.data(), kern.w.data(), bias.w.data(), y.a.data(), x.n, x.t, in_ch_,
                        out_ch_, k_);
  for (int s = 0; s < x.n; ++s) y.len[s] = std::max(1, x.len[s] - k_ + 1);
}

void Conv1d::backward(const SeqBatch& dy, SeqBatch& dx) {
  std::vector<double> dk(kern.size());
  std::vector<double> db(bias.size());
  kernels::conv1d_valid_dw(x_.a.data(), dy.a.data(), dk.data(), db.data(), x_.n, x_.t, in_ch_,
                           out_ch_, k_);
  add_into(kern.g, dk);
  add_into(bias.g, db);
  dx = SeqBatch(x_.n, x_.t, in_ch_);
  dx.len = x_.len;
  kernels::conv1d_valid_dx(dy.a.data(), kern.w.data(), dx.a.data(), x_.n, x_.t, in_ch_, out_ch_, k_);
}

// ------------------------------------------------------------ Conv1dSame ---

Conv1dSame::Conv1dSame(std::string name, int in_ch, int out_ch, int ksize, Rng& rng)
    : kern(name + ".kern", {out_ch, ksize, in_ch}),
      bias(name + ".bias", {out_ch}),
      in_ch_(in_ch),
      out_ch_(out_ch),
      k_(ksize) {
  glorot_init(kern, ksize * in_ch, ksize * out_ch, rng);
}

void Conv1dSame::forward(const SeqBatch& x, SeqBatch& y) {
  const int pad_l = (k_ - 1) / 2;
  orig_t_ = x.t;
  orig_len_ = x.len;
  xpad_ = SeqBatch(x.n, x.t + k_ - 1, in_ch_);
  for (int s = 0; s < x.n; ++s) {
    std::memcpy(xpad_.step(s, pad_l), x.step(s, 0), sizeof(double) * x.t * in_ch_);
  }
  y = SeqBatch(x.n, x.t, out_ch_);
  kernels::conv1d_valid(xpad_.a.data(), kern.w.data(), bias.w.data(), y.a.data(), x.n, xpad_.t,
                        in_ch_, out_ch_, k_);
  y.len = x.len;
}

void Conv1dSame::backward(const SeqBatch& dy, SeqBatch& dx) {
  const int pad_l = (k_ - 1) / 2;
  std::vector<double> dk(kern.size());
  std::vector<double> db(bias.size());
  kernels::conv1d_valid_dw(xpad_.a.data(), dy.a.data(), dk.data(), db.data(), xpad_.n, xpad_.t,
                           in_ch_, out_ch_, k_);
  add_into(kern.g, dk);
  add_into(bias.g, db);
  SeqBatch dxpad(xpad_.n, xpad_.t, in_ch_);
  kernels::conv1d_valid_dx(dy.a.data(), kern.w.data(), dxpad.a.data(), xpad_.n, xpad_.t, in_ch_,
                           out_ch_, k_);
  dx = SeqBatch(xpad_.n, orig_t_, in_ch_);
  dx.len = orig_len_;
  for (int s = 0; s < dx.n; ++s) {
    std::memcpy(dx.step(s, 0), dxpad.step(s, pad_l), sizeof(double) * orig_t_ * in_ch_);
  }
}

// --------------------------------------------------------------- SeqRelu ---

void SeqRelu::forward(const SeqBatch& x, SeqBatch& y) {
  n_ = x.n; t_ = x.t; d_ = x.d;
  y = x;
  mask_.assign(x.a.size(), 0);
  for (size_t i = 0; i < x.a.size(); ++i) {
    if (x.a[i] > 0.0) {
      mask_[i] = 1;
    } else {
      y.a[i] = 0.0;
    }
  }
}

void SeqRelu::backward(const SeqBatch& dy, SeqBatch& dx) {
  dx = dy;
  for (size_t i = 0; i < dx.a.size(); ++i) {
    if (!mask_[i]) dx.a[i] = 0.0;
  }
}

// ----------------------------------------------------------- TimeMaxPool2 ---

void TimeMaxPool2::forward(const SeqBatch& x, SeqBatch& y) {
  n_ = x.n; t_in_ = x.t; d_ = x.d;
  t_out_ = (x.t + 1) / 2;
  len_in_ = x.len;
  y = SeqBatch(x.n, t_out_, x.d);
  arg_.assign(static_cast<size_t>(x.n) * t_out_ * x.d, 0);
  for (int s = 0; s < x.n; ++s) {
    y.len[s] = std::max(1, (x.len[s] + 1) / 2);
    for (int o = 0; o < t_out_; ++o) {
      const int t0 = 2 * o, t1 = std::min(2 * o + 1, x.t - 1);
      const double* a = x.step(s, t0);
      const double* b = x.step(s, t1);
      double* out = y.step(s, o);
      int* arg = arg_.data() + (static_cast<size_t>(s) * t_out_ + o) * d_;
      for (int c = 0; c < d_; ++c) {
        if (t1 != t0 && b[c] > a[c]) {
          out[c] = b[c];
          arg[c] = t1;
        } else {
          out[c] = a[c];
          arg[c] = t0;
        }
      }
    }
  }
}

void TimeMaxPool2::backward(const SeqBatch& dy, SeqBatch& dx) {
  dx = SeqBatch(n_, t_in_, d_);
  dx.len = len_in_;
  for (int s = 0; s < n_; ++s) {
    for (int o = 0; o < t_out_; ++o) {
      const double* dout = dy.step(s, o);
      const int* arg = arg_.data() + (static_cast<size_t>(s) * t_out_ + o) * d_;
      for (int c = 0; c < d_; ++c) dx.step(s, arg[c])[c] += dout[c];
    }
  }
}

// ---------------------------------------------------------- GlobalMaxPool ---

void GlobalMaxPool::forward(const SeqBatch& x, Mat& y) {
  n_ = x.n; t_ = x.t; d_ = x.d;
  len_ = x.len;
  y = Mat(x.n, x.d);
  arg_.assign(static_cast<size_t>(x.n) * x.d, 0);
  for (int s = 0; s < x.n; ++s) {
    const int valid = std::max(1, x.len[s]);
    double* out = y.row(s);
    int* arg = arg_.data() + static_cast<size_t>(s) * d_;
    for (int c = 0; c < d_; ++c) {
      double best = x.step(s, 0)[c];
      int best_t = 0;
      for (int st = 1; st < valid; ++st) {
        double v = x.step(s, st)[c];
        if (v > best) {
          best = v;
          best_t = st;
        }
      }
      out[c] = best;
      arg[c] = best_t;
    }
  }
}

void GlobalMaxPool::backward(const Mat& dy, SeqBatch& dx) {
  dx = SeqBatch(n_, t_, d_);
  dx.len = len_;
  for (int s = 0; s < n_; ++s) {
    const double* dout = dy.row(s);
    const int* arg = arg_.data() + static_cast<size_t>(s) * d_;
    for (int c = 0; c < d_; ++c) dx.step(s, arg[c])[c] += dout[c];
  }
}

// --------------------------------------------------------- MaskedMeanPool ---

void MaskedMeanPool::forward(const SeqBatch& x, Mat& y) {
  n_ = x.n; t_ = x.t; d_ = x.d;
  len_ = x.len;
  y = Mat(x.n, x.d);
  for (int s = 0; s < x.n; ++s) {
    const int valid = std::max(1, x.len[s]);
    double* out = y.row(s);
    for (int st = 0; st < valid; ++st) {
      const double* row = x.step(s, st);
      for (int c = 0; c < d_; ++c) out[c] += row[c];
    }
    for (int c = 0; c < d_; ++c) out[c] /= valid;
  }
}

void MaskedMeanPool::backward(const Mat& dy, SeqBatch& dx) {
  dx = SeqBatch(n_, t_, d_);
  dx.len = len_;
  for (int s = 0; s < n_; ++s) {
    const int valid = std::max(1, len_[s]);
    const double inv = 1.0 / valid;
    const double* dout = dy.row(s);
    for (int st = 0; st < valid; ++st) {
      double* row = dx.step(s, st);
      for (int c = 0; c < d_; ++c) row[c] = dout[c] * inv;
    }
  }
}

// ---------------------------------------------------------------- BiLstm ---

namespace {

// Reverse each sample's valid prefix in time; pad positions stay at the end.
SeqBatch reverse_valid(const SeqBatch& x) {
  SeqBatch out(x.n, x.t, x.d);
  out.len = x.len;
  for (int s = 0; s < x.n; ++s) {
    const int l = x.len[s];
    for (int st = 0; st < l; ++st) {
      std::memcpy(out.step(s, st), x.step(s, l - 1 - st), sizeof(double) * x.d);
    }
  }
  return out;
}

}  // namespace

BiLstm::BiLstm(std::string name, int in_dim, int hidden, Rng& rng)
    : wf(name + ".fwd.w", {in_dim + hidden, 4 * hidden}),
      bf(name + ".fwd.b", {4 * hidden}),
      wb(name + ".bwd.w", {in_dim + hidden, 4 * hidden}),
      bb(name + ".bwd.b", {4 * hidden}),
      in_dim_(in_dim),
      hidden_(hidden) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& v : wf.w) v = rng.uniform(-limit, limit);
  for (double& v : wb.w) v = rng.uniform(-limit, limit);
  // forget gate bias starts at 1
  for (int j = hidden; j < 2 * hidden; ++j) {
    bf.w[j] = 1.0;
    bb.w[j] = 1.0;
  }
}

std::vector<Param*> BiLstm::params() { return {&wf, &bf, &wb, &bb}; }

void BiLstm::run_dir(const SeqBatch& x, Param& w, Param& b, DirCache& cache, SeqBatch& out) {
  const int n = x.n, t = x.t, d = in_dim_, h = hidden_;
  cache.x = x;
  cache.z.assign(t, Mat(n, 4 * h));
  cache.c.assign(t, Mat(n, h));
  cache.h.assign(t, Mat(n, h));
  out = SeqBatch(n, t, h);
  out.len = x.len;

  Mat xh(n, d + h);
  Mat h_prev(n, h), c_prev(n, h);
  for (int st = 0; st < t; ++st) {
    for (int s = 0; s < n; ++s) {
      std::memcpy(xh.row(s), x.step(s, st), sizeof(double) * d);
      std::memcpy(xh.row(s) + d, h_prev.row(s), sizeof(double) * h);
    }
    Mat& z = cache.z[st];
    kernels::matmul_bias(xh.a.data(), w.w.data(), b.w.data(), z.a.data(), n, d + h, 4 * h);
    Mat& c = cache.c[st];
    Mat& hh = cache.h[st];
    for (int s = 0; s < n; ++s) {
      double* zr = z.row(s);
      const double* cp = c_prev.row(s);
      double* cr = c.row(s);
      double* hr = hh.row(s);
      for (int j = 0; j < h; ++j) {
        double gi = sigmoid(zr[j]);
        double gf = sigmoid(zr[h + j]);
        double gg = std::tanh(zr[2 * h + j]);
        double go = sigmoid(zr[3 * h + j]);
        zr[j] = gi;
        zr[h + j] = gf;
        zr[2 * h + j] = gg;
        zr[3 * h + j] = go;
        cr[j] = gf * cp[j] + gi * gg;
        hr[j] = go * std::tanh(cr[j]);
      }
    }
    for (int s = 0; s < n; ++s) {
      if (st < x.len[s]) std::memcpy(out.step(s, st), hh.row(s), sizeof(double) * h);
    }
    h_prev = hh;
    c_prev = c;
  }
}

void BiLstm::back_dir(const SeqBatch& dout, Param& w, Param& b, DirCache& cache, SeqBatch& dx_add) {
  const int n = cache.x.n, t = cache.x.t, d = in_dim_, h = hidden_;
  Mat dh_next(n, h), dc_next(n, h);
  Mat dz(n, 4 * h);
  Mat xh(n, d + h), dxh(n, d + h);
  std::vector<double> dw(w.size());

  for (int st = t - 1; st >= 0; --st) {
    const Mat& z = cache.z[st];
    const Mat& c = cache.c[st];
    const Mat* c_prev = st > 0 ? &cache.c[st - 1] : nullptr;
    const Mat* h_prev = st > 0 ? &cache.h[st - 1] : nullptr;
    for (int s = 0; s < n; ++s) {
      const double* zr = z.row(s);
      const double* cr = c.row(s);
      double* dzr = dz.row(s);
      double* dhn = dh_next.row(s);
      double* dcn = dc_next.row(s);
      const double* dout_r = dout.step(s, st);
      const bool valid = st < cache.x.len[s];
      for (int j = 0; j < h; ++j) {
        const double gi = zr[j], gf = zr[h + j], gg = zr[2 * h + j], go = zr[3 * h + j];
        const double tc = std::tanh(cr[j]);
        const double dh = (valid ? dout_r[j] : 0.0) + dhn[j];
        const double dgo = dh * tc;
        double dc = dcn[j] + dh * go * (1.0 - tc * tc);
        const double cprev = c_prev ? c_prev->at(s, j) : 0.0;
        const double dgi = dc * gg;
        const double dgf = dc * cprev;
        const double dgg = dc * gi;
        dzr[j] = dgi * gi * (1.0 - gi);
        dzr[h + j] = dgf * gf * (1.0 - gf);
        dzr[2 * h + j] = dgg * (1.0 - gg * gg);
        dzr[3 * h + j] = dgo * go * (1.0 - go);
        dcn[j] = dc * gf;
      }
    }
    for (int s = 0; s < n; ++s) {
      std::memcpy(xh.row(s), cache.x.step(s, st), sizeof(double) * d);
      if (h_prev) {
        std::memcpy(xh.row(s) + d, h_prev->row(s), sizeof(double) * h);
      } else {
        std::memset(xh.row(s) + d, 0, sizeof(double) * h);
      }
    }
    kernels::matmul_at_b(xh.a.data(), dz.a.data(), dw.data(), n, d + h, 4 * h);
    add_into(w.g, dw);
    for (int s = 0; s < n; ++s) {
      const double* dzr = dz.row(s);
      for (int j = 0; j < 4 * h; ++j) b.g[j] += dzr[j];
    }
    kernels::matmul_a_bt(dz.a.data(), w.w.data(), dxh.a.data(), n, 4 * h, d + h);
    for (int s = 0; s < n; ++s) {
      double* dst = dx_add.step(s, st);
      const double* src = dxh.row(s);
      for (int j = 0; j < d; ++j) dst[j] += src[j];
      std::memcpy(dh_next.row(s), src + d, sizeof(double) * h);
    }
  }
}

void BiLstm::forward(const SeqBatch& x, SeqBatch& y) {
  SeqBatch out_f, out_b;
  run_dir(x, wf, bf, fwd_, out_f);
  SeqBatch x_rev = reverse_valid(x);
  SeqBatch out_b_rev;
  run_dir(x_rev, wb, bb, bwd_, out_b_rev);
  out_b = reverse_valid(out_b_rev);

  y = SeqBatch(x.n, x.t, 2 * hidden_);
  y.len = x.len;
  for (int s = 0; s < x.n; ++s) {
    for (int st = 0; st < x.len[s]; ++st) {
      std::memcpy(y.step(s, st), out_f.step(s, st), sizeof(double) * hidden_);
      std::memcpy(y.step(s, st) + hidden_, out_b.step(s, st), sizeof(double) * hidden_);
    }
  }
}

void BiLstm::backward(const SeqBatch& dy, SeqBatch& dx) {
  const int n = dy.n, t = dy.t, h = hidden_;
  SeqBatch dout_f(n, t, h), dout_b(n, t, h);
  dout_f.len = dy.len;
  dout_b.len = dy.len;
  for (int s = 0; s < n; ++s) {
    for (int st = 0; st < dy.len[s]; ++st) {
      std::memcpy(dout_f.step(s, st), dy.step(s, st), sizeof(double) * h);
      std::memcpy(dout_b.step(s, st), dy.step(s, st) + h, sizeof(double) * h);
    }
  }
  dx = SeqBatch(n, t, in_dim_);
  dx.len = dy.len;
  back_dir(dout_f, wf, bf, fwd_, dx);

  SeqBatch dout_b_rev = reverse_valid(dout_b);
  SeqBatch dx_rev(n, t, in_dim_);
  dx_rev.len = dy.len;
  back_dir(dout_b_rev, wb, bb, bwd_, dx_rev);
  SeqBatch dx_b = reverse_valid(dx_rev);
  for (size_t i = 0; i < dx.a.size(); ++i) dx.a[i] += dx_b.a[i];
}

// ------------------------------------------------------ ResidualConvBlock ---

ResidualConvBlock::ResidualConvBlock(std::string name, int in_ch, int out_ch, int ksize, Rng& rng)
    : conv1(name + ".conv1", in_ch, out_ch, ksize, rng),
      conv2(name + ".conv2", out_ch, out_ch, ksize, rng) {
  if (in_ch != out_ch) proj_ = std::make_unique<Conv1dSame>(name + ".proj", in_ch, out_ch, 1, rng);
}

void ResidualConvBlock::forward(const SeqBatch& x, SeqBatch& y) {
  SeqBatch pooled, c1, c1r, c2;
  pool_.forward(x, pooled);
  conv1.forward(pooled, c1);
  relu_.forward(c1, c1r);
  conv2.forward(c1r, c2);
  if (proj_) {
    proj_->forward(pooled, y);
  } else {
    y = pooled;
  }
  for (size_t i = 0; i < y.a.size(); ++i) y.a[i] += c2.a[i];
}

void ResidualConvBlock::backward(const SeqBatch& dy, SeqBatch& dx) {
  SeqBatch dc1r, dc1, dpooled_conv;
  conv2.backward(dy, dc1r);
  relu_.backward(dc1r, dc1);
  conv1.backward(dc1, dpooled_conv);
  SeqBatch dpooled;
  if (proj_) {
    proj_->backward(dy, dpooled);
  } else {
    dpooled = dy;
  }
  for (size_t i = 0; i < dpooled.a.size(); ++i) dpooled.a[i] += dpooled_conv.a[i];
  pool_.backward(dpooled, dx);
}

std::vector<Param*> ResidualConvBlock::params() {
  std::vector<Param*> out{&conv1.kern, &conv1.bias, &conv2.kern, &conv2.bias};
  if (proj_) {
    out.push_back(&proj_->kern);
    out.push_back(&proj_->bias);
  }
  return out;
}

// ----------------------------------------------------- AdditiveAttention ---

AdditiveAttention::AdditiveAttention(std::string name, int in_dim, int attn_dim, Rng& rng)
    : w(name + ".w", {in_dim, attn_dim}),
      b(name + ".b", {attn_dim}),
      v(name + ".v", {attn_dim}),
      in_dim_(in_dim),
      attn_dim_(attn_dim) {
  glorot_init(w, in_dim, attn_dim, rng);
  glorot_init(v, attn_dim, 1, rng);
}

void AdditiveAttention::forward(const SeqBatch& h, SeqBatch& y) {
  h_ = h;
  const int n = h.n, t = h.t;
  tanh_u_ = SeqBatch(n, t, attn_dim_);
  tanh_u_.len = h.len;
  kernels::matmul(h.a.data(), w.w.data(), tanh_u_.a.data(), n * t, in_dim_, attn_dim_);
  alpha_ = Mat(n, t);
  for (int s = 0; s < n; ++s) {
    const int valid = std::max(1, h.len[s]);
    // scores
    std::vector<double> e(valid);
    for (int st = 0; st < valid; ++st) {
      double* u = tanh_u_.step(s, st);
      double score = 0.0;
      for (int j = 0; j < attn_dim_; ++j) {
        u[j] = std::tanh(u[j] + b.w[j]);
        score += v.w[j] * u[j];
      }
      e[st] = score;
    }
    double mx = e[0];
    for (int st = 1; st < valid; ++st) mx = std::max(mx, e[st]);
    double sum = 0.0;
    for (int st = 0; st < valid; ++st) {
      e[st] = std::exp(e[st] - mx);
      sum += e[st];
    }
    for (int st = 0; st < valid; ++st) alpha_.at(s, st) = e[st] / sum;
  }
  y = SeqBatch(n, t, in_dim_);
  y.len = h.len;
  for (int s = 0; s < n; ++s) {
    for (int st = 0; st < h.len[s]; ++st) {
      const double a = alpha_.at(s, st);
      const double* src = h.step(s, st);
      double* dst = y.step(s, st);
      for (int j = 0; j < in_dim_; ++j) dst[j] = a * src[j];
    }
  }
}

void AdditiveAttention::backward(const SeqBatch& dy, SeqBatch& dh) {
  const int n = h_.n, t = h_.t;
  dh = SeqBatch(n, t, in_dim_);
  dh.len = h_.len;
  SeqBatch du(n, t, attn_dim_);
  for (int s = 0; s < n; ++s) {
    const int valid = std::max(1, h_.len[s]);
    std::vector<double> dalpha(valid, 0.0);
    for (int st = 0; st < valid; ++st) {
      const double a = alpha_.at(s, st);
      const double* dyr = dy.step(s, st);
      const double* hr = h_.step(s, st);
      double* dhr = dh.step(s, st);
      double acc = 0.0;
      for (int j = 0; j < in_dim_; ++j) {
        dhr[j] = a * dyr[j];
        acc += dyr[j] * hr[j];
      }
      dalpha[st] = acc;
    }
    // softmax backward
    double dot = 0.0;
    for (int st = 0; st < valid; ++st) dot += alpha_.at(s, st) * dalpha[st];
    for (int st = 0; st < valid; ++st) {
      const double de = alpha_.at(s, st) * (dalpha[st] - dot);
      const double* u = tanh_u_.step(s, st);
      double* dur = du.step(s, st);
      for (int j = 0; j < attn_dim_; ++j) {
        v.g[j] += de * u[j];
        dur[j] = de * v.w[j] * (1.0 - u[j] * u[j]);
        b.g[j] += dur[j];
      }
    }
  }
  std::vector<double> dw(w.size());
  kernels::matmul_at_b(h_.a.data(), du.a.data(), dw.data(), n * t, in_dim_, attn_dim_);
  add_into(w.g, dw);
  SeqBatch dh2(n, t, in_dim_);
  kernels::matmul_a_bt(du.a.data(), w.w.data(), dh2.a.data(), n * t, attn_dim_, in_dim_);
  for (size_t i = 0; i < dh.a.size(); ++i) dh.a[i] += dh2.a[i];
}

}  // namespace hsd::nn
