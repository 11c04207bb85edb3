#include "hsd/mlm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

#include "hsd/kernels.hpp"

namespace hsd {

using nn::Mat;
using nn::Param;

nlohmann::json MlmConfig::to_json() const {
  return {{"dim", dim},           {"layers", layers},
          {"heads", heads},       {"ff_dim", ff_dim},
          {"max_len", max_len},   {"mask_frac", mask_frac},
          {"lr", lr},             {"batch_size", batch_size},
          {"epochs", epochs},     {"holdout_frac", holdout_frac},
          {"seed", seed}};
}

MlmConfig MlmConfig::from_json(const nlohmann::json& j) {
  MlmConfig c;
  c.dim = j.at("dim").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ff_dim = j.at("ff_dim").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.mask_frac = j.at("mask_frac").get<double>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.holdout_frac = j.at("holdout_frac").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

SentenceEncoder::Layer::Layer(const std::string& p, int dim, int ff, Rng& rng)
    : wq(p + ".wq", {dim, dim}),
      bq(p + ".bq", {dim}),
      wk(p + ".wk", {dim, dim}),
      bk(p + ".bk", {dim}),
      wv(p + ".wv", {dim, dim}),
      bv(p + ".bv", {dim}),
      wo(p + ".wo", {dim, dim}),
      bo(p + ".bo", {dim}),
      ln1_g(p + ".ln1.g", {dim}),
      ln1_b(p + ".ln1.b", {dim}),
      ln2_g(p + ".ln2.g", {dim}),
      ln2_b(p + ".ln2.b", {dim}),
      w1(p + ".ff.w1", {dim, ff}),
      b1(p + ".ff.b1", {ff}),
      w2(p + ".ff.w2", {ff, dim}),
      b2(p + ".ff.b2", {dim}) {
  nn::glorot_init(wq, dim, dim, rng);
  nn::glorot_init(wk, dim, dim, rng);
  nn::glorot_init(wv, dim, dim, rng);
  nn::glorot_init(wo, dim, dim, rng);
  nn::glorot_init(w1, dim, ff, rng);
  nn::glorot_init(w2, ff, dim, rng);
  std::fill(ln1_g.w.begin(), ln1_g.w.end(), 1.0);
  std::fill(ln2_g.w.begin(), ln2_g.w.end(), 1.0);
}

SentenceEncoder::SentenceEncoder(Vocabulary vocab, MlmConfig cfg)
    : vocab_(std::move(vocab)),
      cfg_(cfg),
      tok_emb_("tok_emb", {vocab_.size(), cfg.dim}),
      pos_emb_("pos_emb", {cfg.max_len, cfg.dim}),
      out_w_("out.w", {cfg.dim, vocab_.size()}),
      out_b_("out.b", {vocab_.size()}) {
  if (cfg_.dim % cfg_.heads != 0) {
    throw std::invalid_argument("encoder dim must be divisible by heads");
  }
  Rng rng(cfg_.seed);
  for (double& v : tok_emb_.w) v = rng.normal(0.0, 0.02);
  for (double& v : pos_emb_.w) v = rng.normal(0.0, 0.02);
  for (int l = 0; l < cfg_.layers; ++l) {
    layers_.emplace_back("layer" + std::to_string(l), cfg_.dim, cfg_.ff_dim, rng);
  }
  nn::glorot_init(out_w_, cfg_.dim, vocab_.size(), rng);
}

std::vector<Param*> SentenceEncoder::params() {
  std::vector<Param*> out{&tok_emb_, &pos_emb_};
  for (auto& l : layers_) {
    for (Param* p : {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo, &l.ln1_g, &l.ln1_b,
                     &l.ln2_g, &l.ln2_b, &l.w1, &l.b1, &l.w2, &l.b2}) {
      out.push_back(p);
    }
  }
  out.push_back(&out_w_);
  out.push_back(&out_b_);
  return out;
}

// ------------------------------------------------------------ forward/bwd ---

struct SentenceEncoder::Batch {
  int b = 0, t = 0;
  std::vector<int> ids;  // b*t, pad id where unused
  std::vector<int> len;
  // masked training positions: (flat row index, original token id)
  std::vector<std::pair<int, int>> masked;
};

namespace {

struct LnCache {
  Mat xhat;
  std::vector<double> inv_std;
};

// Row-wise layer norm. Writes y, fills cache.
void layernorm_fwd(const Mat& x, const Param& gamma, const Param& beta, Mat& y, LnCache& c) {
  const int d = x.cols;
  y = Mat(x.rows, d);
  c.xhat = Mat(x.rows, d);
  c.inv_std.assign(x.rows, 0.0);
  for (int r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += xr[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    c.inv_std[r] = inv;
    double* xh = c.xhat.row(r);
    double* yr = y.row(r);
    for (int j = 0; j < d; ++j) {
      xh[j] = (xr[j] - mu) * inv;
      yr[j] = gamma.w[j] * xh[j] + beta.w[j];
    }
  }
}

void layernorm_bwd(const Mat& dy, const LnCache& c, Param& gamma, Param& beta, Mat& dx) {
  const int d = dy.cols;
  dx = Mat(dy.rows, d);
  for (int r = 0; r < dy.rows; ++r) {
    const double* dyr = dy.row(r);
    const double* xh = c.xhat.row(r);
    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    for (int j = 0; j < d; ++j) {
      gamma.g[j] += dyr[j] * xh[j];
      beta.g[j] += dyr[j];
      const double dxh = dyr[j] * gamma.w[j];
      sum_dxhat += dxh;
      sum_dxhat_xhat += dxh * xh[j];
    }
    const double inv = c.inv_std[r];
    double* dxr = dx.row(r);
    for (int j = 0; j < d; ++j) {
      const double dxh = dyr[j] * gamma.w[j];
      dxr[j] = inv * (dxh - sum_dxhat / d - xh[j] * sum_dxhat_xhat / d);
    }
  }
}

void linear_fwd(const Mat& x, const Param& w, const Param& b, Mat& y) {
  y = Mat(x.rows, w.shape[1]);
  kernels::matmul_bias(x.a.data(), w.w.data(), b.w.data(), y.a.data(), x.rows, w.shape[0],
                       w.shape[1]);
}

// dx assigned; dw/db accumulated.
void linear_bwd(const Mat& x, const Mat& dy, Param& w, Param& b, Mat& dx) {
  std::vector<double> dw(w.size());
  kernels::matmul_at_b(x.a.data(), dy.a.data(), dw.data(), x.rows, w.shape[0], w.shape[1]);
  for (size_t i = 0; i < dw.size(); ++i) w.g[i] += dw[i];
  for (int r = 0; r < dy.rows; ++r) {
    const double* dyr = dy.row(r);
    for (int j = 0; j < dy.cols; ++j) b.g[j] += dyr[j];
  }
  dx = Mat(x.rows, w.shape[0]);
  kernels::matmul_a_bt(dy.a.data(), w.w.data(), dx.a.data(), dy.rows, w.shape[1], w.shape[0]);
}

struct LayerCache {
  Mat x_in, q, k, v, ctx, o, x_mid, h1, h2;
  std::vector<uint8_t> relu_mask;
  std::vector<double> attn;  // b*heads*t*t
  LnCache ln1, ln2;
};

}  // namespace

struct SentenceEncoder::Caches {
  Mat emb;
  std::vector<LayerCache> layers;
};

nn::Mat SentenceEncoder::forward(const Batch& batch, Caches* caches) const {
  const int b = batch.b, t = batch.t, d = cfg_.dim;
  const int heads = cfg_.heads, dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Caches local;
  Caches& cc = caches ? *caches : local;
  cc.layers.assign(cfg_.layers, LayerCache{});

  Mat x(b * t, d);
  for (int s = 0; s < b; ++s) {
    for (int pos = 0; pos < t; ++pos) {
      const int row = s * t + pos;
      const int id = batch.ids[row];
      double* xr = x.row(row);
      const double* te = tok_emb_.w.data() + static_cast<size_t>(id) * d;
      const double* pe = pos_emb_.w.data() + static_cast<size_t>(pos) * d;
      for (int j = 0; j < d; ++j) xr[j] = te[j] + pe[j];
    }
  }
  cc.emb = x;

  for (int l = 0; l < cfg_.layers; ++l) {
    const Layer& L = layers_[l];
    LayerCache& c = cc.layers[l];
    c.x_in = x;
    linear_fwd(x, L.wq, L.bq, c.q);
    linear_fwd(x, L.wk, L.bk, c.k);
    linear_fwd(x, L.wv, L.bv, c.v);
    c.ctx = Mat(b * t, d);
    c.attn.assign(static_cast<size_t>(b) * heads * t * t, 0.0);
    for (int s = 0; s < b; ++s) {
      const int valid = batch.len[s];
      for (int h = 0; h < heads; ++h) {
        double* attn = c.attn.data() + ((static_cast<size_t>(s) * heads + h) * t) * t;
        for (int i = 0; i < t; ++i) {
          const double* qi = c.q.row(s * t + i) + h * dh;
          double mx = -1e300;
          std::vector<double> sc(valid);
          for (int j = 0; j < valid; ++j) {
            const double* kj = c.k.row(s * t + j) + h * dh;
            double dot = 0.0;
            for (int e = 0; e < dh; ++e) dot += qi[e] * kj[e];
            sc[j] = dot * scale;
            mx = std::max(mx, sc[j]);
          }
          double sum = 0.0;
          for (int j = 0; j < valid; ++j) {
            sc[j] = std::exp(sc[j] - mx);
            sum += sc[j];
          }
          double* ctx = c.ctx.row(s * t + i) + h * dh;
          for (int j = 0; j < valid; ++j) {
            const double a = sc[j] / sum;
            attn[static_cast<size_t>(i) * t + j] = a;
            const double* vj = c.v.row(s * t + j) + h * dh;
            for (int e = 0; e < dh; ++e) ctx[e] += a * vj[e];
          }
        }
      }
    }
    linear_fwd(c.ctx, L.wo, L.bo, c.o);
    Mat res1 = c.o;
    for (size_t i = 0; i < res1.a.size(); ++i) res1.a[i] += x.a[i];
    layernorm_fwd(res1, L.ln1_g, L.ln1_b, c.x_mid, c.ln1);
    linear_fwd(c.x_mid, L.w1, L.b1, c.h1);
    c.relu_mask.assign(c.h1.a.size(), 0);
    for (size_t i = 0; i < c.h1.a.size(); ++i) {
      if (c.h1.a[i] > 0.0) {
        c.relu_mask[i] = 1;
      } else {
        c.h1.a[i] = 0.0;
      }
    }
    linear_fwd(c.h1, L.w2, L.b2, c.h2);
    Mat res2 = c.h2;
    for (size_t i = 0; i < res2.a.size(); ++i) res2.a[i] += c.x_mid.a[i];
    Mat x_out;
    layernorm_fwd(res2, L.ln2_g, L.ln2_b, x_out, c.ln2);
    x = std::move(x_out);
  }
  return x;
}

void SentenceEncoder::backward(const Batch& batch, const nn::Mat& dx_out, Caches& cc) {
  const int b = batch.b, t = batch.t, d = cfg_.dim;
  const int heads = cfg_.heads, dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat dx = dx_out;
  for (int l = cfg_.layers - 1; l >= 0; --l) {
    Layer& L = layers_[l];
    LayerCache& c = cc.layers[l];
    Mat dres2;
    layernorm_bwd(dx, c.ln2, L.ln2_g, L.ln2_b, dres2);
    // res2 = x_mid + h2
    Mat dh2 = dres2;
    Mat dh1;
    linear_bwd(c.h1, dh2, L.w2, L.b2, dh1);
    for (size_t i = 0; i < dh1.a.size(); ++i) {
      if (!c.relu_mask[i]) dh1.a[i] = 0.0;
    }
    Mat dx_mid_ff;
    linear_bwd(c.x_mid, dh1, L.w1, L.b1, dx_mid_ff);
    Mat dx_mid = dres2;
    for (size_t i = 0; i < dx_mid.a.size(); ++i) dx_mid.a[i] += dx_mid_ff.a[i];
    Mat dres1;
    layernorm_bwd(dx_mid, c.ln1, L.ln1_g, L.ln1_b, dres1);
    // res1 = x_in + o
    Mat do_ = dres1;
    Mat dctx;
    linear_bwd(c.ctx, do_, L.wo, L.bo, dctx);
    Mat dq(b * t, d), dk(b * t, d), dv(b * t, d);
    for (int s = 0; s < b; ++s) {
      const int valid = batch.len[s];
      for (int h = 0; h < heads; ++h) {
        const double* attn = cc.layers[l].attn.data() + ((static_cast<size_t>(s) * heads + h) * t) * t;
        for (int i = 0; i < t; ++i) {
          const double* dctx_i = dctx.row(s * t + i) + h * dh;
          // dA and softmax backward
          std::vector<double> da(valid, 0.0);
          double dot = 0.0;
          for (int j = 0; j < valid; ++j) {
            const double* vj = c.v.row(s * t + j) + h * dh;
            double acc = 0.0;
            for (int e = 0; e < dh; ++e) acc += dctx_i[e] * vj[e];
            da[j] = acc;
            dot += attn[static_cast<size_t>(i) * t + j] * acc;
          }
          for (int j = 0; j < valid; ++j) {
            const double a = attn[static_cast<size_t>(i) * t + j];
            const double ds = a * (da[j] - dot) * scale;
            const double* qi = c.q.row(s * t + i) + h * dh;
            const double* kj = c.k.row(s * t + j) + h * dh;
            double* dqi = dq.row(s * t + i) + h * dh;
            double* dkj = dk.row(s * t + j) + h * dh;
            double* dvj = dv.row(s * t + j) + h * dh;
            for (int e = 0; e < dh; ++e) {
              dqi[e] += ds * kj[e];
              dkj[e] += ds * qi[e];
              dvj[e] += a * dctx_i[e];
            }
          }
        }
      }
    }
    Mat dx_in = dres1;  // residual shortcut
    Mat tmp;
    linear_bwd(c.x_in, dq, L.wq, L.bq, tmp);
    for (size_t i = 0; i < dx_in.a.size(); ++i) dx_in.a[i] += tmp.a[i];
    linear_bwd(c.x_in, dk, L.wk, L.bk, tmp);
    for (size_t i = 0; i < dx_in.a.size(); ++i) dx_in.a[i] += tmp.a[i];
    linear_bwd(c.x_in, dv, L.wv, L.bv, tmp);
    for (size_t i = 0; i < dx_in.a.size(); ++i) dx_in.a[i] += tmp.a[i];
    dx = std::move(dx_in);
  }
  // embedding grads
  for (int s = 0; s < b; ++s) {
    for (int pos = 0; pos < t; ++pos) {
      const int row = s * t + pos;
      const int id = batch.ids[row];
      const double* dr = dx.row(row);
      double* tg = tok_emb_.g.data() + static_cast<size_t>(id) * d;
      double* pg = pos_emb_.g.data() + static_cast<size_t>(pos) * d;
      for (int j = 0; j < d; ++j) {
        tg[j] += dr[j];
        pg[j] += dr[j];
      }
    }
  }
}

// --------------------------------------------------------------- training ---

std::vector<int> SentenceEncoder::to_ids(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  const size_t limit = std::min<size_t>(tokens.size(), cfg_.max_len);
  ids.reserve(limit);
  for (size_t i = 0; i < limit; ++i) ids.push_back(vocab_.index(tokens[i]));
  return ids;
}

namespace {

// Distinct masked positions for one sequence; at least one.
std::vector<int> pick_mask_positions(int len, double frac, Rng& rng) {
  const int n_mask = std::max(1, static_cast<int>(std::llround(frac * len)));
  std::set<int> chosen;
  while (static_cast<int>(chosen.size()) < std::min(n_mask, len)) {
    chosen.insert(static_cast<int>(rng.uniform_int(len)));
  }
  return {chosen.begin(), chosen.end()};
}

}  // namespace

double SentenceEncoder::masked_loss(const std::vector<std::vector<int>>& ids, uint64_t mask_seed) {
  double total = 0.0;
  long count = 0;
  const int bs = std::max(1, cfg_.batch_size);
  Rng base(mask_seed);
  for (size_t start = 0; start < ids.size(); start += bs) {
    const size_t end = std::min(ids.size(), start + bs);
    Batch batch;
    batch.b = static_cast<int>(end - start);
    int t = 1;
    for (size_t i = start; i < end; ++i) t = std::max(t, static_cast<int>(ids[i].size()));
    batch.t = t;
    batch.ids.assign(static_cast<size_t>(batch.b) * t, Vocabulary::kPad);
    batch.len.resize(batch.b);
    for (size_t i = start; i < end; ++i) {
      const int s = static_cast<int>(i - start);
      const auto& seq = ids[i];
      batch.len[s] = std::max<int>(1, static_cast<int>(seq.size()));
      for (size_t j = 0; j < seq.size(); ++j) batch.ids[s * t + j] = seq[j];
      Rng mask_rng = base.fork(i);
      for (int pos : pick_mask_positions(static_cast<int>(seq.size()), cfg_.mask_frac, mask_rng)) {
        batch.masked.emplace_back(s * t + pos, seq[pos]);
        batch.ids[s * t + pos] = Vocabulary::kMask;
      }
    }
    Mat x = forward(batch, nullptr);
    // gather masked rows, project, CE
    for (const auto& [row, gold] : batch.masked) {
      Mat xi(1, cfg_.dim);
      std::memcpy(xi.a.data(), x.row(row), sizeof(double) * cfg_.dim);
      Mat logits;
      linear_fwd(xi, out_w_, out_b_, logits);
      nn::softmax_rows(logits);
      total += -std::log(std::max(1e-12, logits.at(0, gold)));
      ++count;
    }
  }
  return count ? total / count : 0.0;
}

SentenceEncoder::TrainStats SentenceEncoder::train(
    const std::vector<std::vector<std::string>>& corpus) {
  std::vector<std::vector<int>> ids;
  for (const auto& sent : corpus) {
    auto v = to_ids(sent);
    if (!v.empty()) ids.push_back(std::move(v));
  }
  if (ids.size() < 2) {
    throw std::invalid_argument("mlm corpus too small to hold out a validation slice");
  }
  Rng split_rng = Rng(cfg_.seed).fork(7);
  std::vector<int> order(ids.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  split_rng.shuffle(order);
  const size_t n_hold = std::max<size_t>(1, static_cast<size_t>(std::llround(cfg_.holdout_frac * ids.size())));
  std::vector<std::vector<int>> hold, tr;
  for (size_t i = 0; i < order.size(); ++i) {
    (i < n_hold ? hold : tr).push_back(ids[order[i]]);
  }
  if (tr.empty()) throw std::invalid_argument("mlm corpus too small to hold out a validation slice");

  const uint64_t holdout_mask_seed = Rng(cfg_.seed).fork(8).next_u64();
  TrainStats stats;
  stats.initial_holdout_loss = masked_loss(hold, holdout_mask_seed);

  nn::Adam adam([this] {
    size_t total = 0;
    for (Param* p : params()) total += p->size();
    return total;
  }(), cfg_.lr);
  Rng shuffle_rng = Rng(cfg_.seed).fork(9);
  Rng mask_rng = Rng(cfg_.seed).fork(10);
  auto plist = params();

  const int bs = std::max(1, cfg_.batch_size);
  std::vector<int> tr_order(tr.size());
  for (size_t i = 0; i < tr_order.size(); ++i) tr_order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    shuffle_rng.shuffle(tr_order);
    double epoch_loss = 0.0;
    long epoch_count = 0;
    for (size_t start = 0; start < tr_order.size(); start += bs) {
      const size_t end = std::min(tr_order.size(), start + bs);
      Batch batch;
      batch.b = static_cast<int>(end - start);
      int t = 1;
      for (size_t i = start; i < end; ++i) {
        t = std::max(t, static_cast<int>(tr[tr_order[i]].size()));
      }
      batch.t = t;
      batch.ids.assign(static_cast<size_t>(batch.b) * t, Vocabulary::kPad);
      batch.len.resize(batch.b);
      for (size_t i = start; i < end; ++i) {
        const int s = static_cast<int>(i - start);
        const auto& seq = tr[tr_order[i]];
        batch.len[s] = std::max<int>(1, static_cast<int>(seq.size()));
        for (size_t j = 0; j < seq.size(); ++j) batch.ids[s * t + j] = seq[j];
        for (int pos : pick_mask_positions(static_cast<int>(seq.size()), cfg_.mask_frac, mask_rng)) {
          batch.masked.emplace_back(s * t + pos, seq[pos]);
          batch.ids[s * t + pos] = Vocabulary::kMask;
        }
      }
      if (batch.masked.empty()) continue;

      Caches caches;
      Mat x = forward(batch, &caches);
      const int nm = static_cast<int>(batch.masked.size());
      Mat gathered(nm, cfg_.dim);
      for (int i = 0; i < nm; ++i) {
        std::memcpy(gathered.row(i), x.row(batch.masked[i].first), sizeof(double) * cfg_.dim);
      }
      Mat logits;
      linear_fwd(gathered, out_w_, out_b_, logits);
      nn::softmax_rows(logits);
      double loss = 0.0;
      for (int i = 0; i < nm; ++i) {
        loss += -std::log(std::max(1e-12, logits.at(i, batch.masked[i].second)));
      }
      loss /= nm;
      if (!std::isfinite(loss)) {
        throw std::runtime_error("mlm training diverged (non-finite loss)");
      }
      epoch_loss += loss * nm;
      epoch_count += nm;

      // dlogits for mean CE over masked rows
      Mat dlogits = logits;
      for (int i = 0; i < nm; ++i) {
        dlogits.at(i, batch.masked[i].second) -= 1.0;
        for (int j = 0; j < dlogits.cols; ++j) dlogits.at(i, j) /= nm;
      }
      for (Param* p : plist) std::fill(p->g.begin(), p->g.end(), 0.0);
      Mat dgathered;
      linear_bwd(gathered, dlogits, out_w_, out_b_, dgathered);
      Mat dx(x.rows, x.cols);
      for (int i = 0; i < nm; ++i) {
        double* dst = dx.row(batch.masked[i].first);
        const double* src = dgathered.row(i);
        for (int j = 0; j < cfg_.dim; ++j) dst[j] += src[j];
      }
      backward(batch, dx, caches);
      adam.step(plist);
    }
    stats.epoch_loss.push_back(epoch_count ? epoch_loss / epoch_count : 0.0);
  }
  stats.final_holdout_loss = masked_loss(hold, holdout_mask_seed);
  return stats;
}

// -------------------------------------------------------------- inference ---

std::vector<double> SentenceEncoder::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids = to_ids(tokens);
  if (ids.empty()) ids.push_back(Vocabulary::kPad);
  Batch batch;
  batch.b = 1;
  batch.t = static_cast<int>(ids.size());
  batch.ids = ids;
  batch.len = {batch.t};
  Mat x = forward(batch, nullptr);
  std::vector<double> out(cfg_.dim, 0.0);
  for (int pos = 0; pos < batch.t; ++pos) {
    const double* r = x.row(pos);
    for (int j = 0; j < cfg_.dim; ++j) out[j] += r[j];
  }
  for (double& v : out) v /= batch.t;
  return out;
}

std::vector<std::pair<std::string, double>> SentenceEncoder::propose_masked(
    const std::vector<std::string>& tokens, int position, int top_k) const {
  std::vector<int> ids = to_ids(tokens);
  if (position < 0 || position >= static_cast<int>(ids.size())) {
    throw std::out_of_range("propose_masked: position out of range");
  }
  if (top_k < 1) throw std::invalid_argument("propose_masked: top_k must be >= 1");
  ids[position] = Vocabulary::kMask;
  Batch batch;
  batch.b = 1;
  batch.t = static_cast<int>(ids.size());
  batch.ids = ids;
  batch.len = {batch.t};
  Mat x = forward(batch, nullptr);
  Mat xi(1, cfg_.dim);
  std::memcpy(xi.a.data(), x.row(position), sizeof(double) * cfg_.dim);
  Mat logits;
  linear_fwd(xi, out_w_, out_b_, logits);
  nn::softmax_rows(logits);
  std::vector<std::pair<int, double>> scored;
  scored.reserve(vocab_.size());
  for (int i = Vocabulary::kNumSpecials; i < vocab_.size(); ++i) {
    scored.emplace_back(i, logits.at(0, i));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::pair<std::string, double>> out;
  const int k = std::min<int>(top_k, static_cast<int>(scored.size()));
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.emplace_back(vocab_.token(scored[i].first), scored[i].second);
  return out;
}

// ----------------------------------------------------------- persistence ---

nlohmann::json SentenceEncoder::to_json() const {
  nlohmann::json params_j = nlohmann::json::object();
  auto* self = const_cast<SentenceEncoder*>(this);
  for (Param* p : self->params()) {
    params_j[p->name] = {{"shape", p->shape}, {"data", p->w}};
  }
  std::vector<std::string> toks = vocab_.tokens();
  toks.erase(toks.begin(), toks.begin() + Vocabulary::kNumSpecials);
  return {{"format", "hsd-encoder-v1"},
          {"config", cfg_.to_json()},
          {"vocab", toks},
          {"params", params_j}};
}

SentenceEncoder SentenceEncoder::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "hsd-encoder-v1") {
    throw std::invalid_argument("not an encoder snapshot (format field mismatch)");
  }
  Vocabulary vocab;
  for (const auto& t : j.at("vocab")) vocab.add(t.get<std::string>());
  SentenceEncoder enc(std::move(vocab), MlmConfig::from_json(j.at("config")));
  const auto& params_j = j.at("params");
  for (Param* p : enc.params()) {
    if (!params_j.contains(p->name)) {
      throw std::invalid_argument("encoder snapshot missing parameter " + p->name);
    }
    auto data = params_j.at(p->name).at("data").get<std::vector<double>>();
    if (data.size() != p->size()) {
      throw std::invalid_argument("encoder snapshot parameter " + p->name + " has wrong size");
    }
    p->w = std::move(data);
  }
  return enc;
}

}  // namespace hsd
