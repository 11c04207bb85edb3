#include "hsd/embedding.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hsd {

void EmbeddingMatrix::validate() const {
  if (dim <= 0) throw std::invalid_argument("embedding dim must be positive");
  if (vectors.size() != static_cast<size_t>(vocab.size()) * dim) {
    throw std::invalid_argument("embedding matrix shape mismatch");
  }
  for (float v : vectors) {
    if (!std::isfinite(v)) throw std::invalid_argument("embedding matrix contains non-finite values");
  }
}

EmbeddingMatrix load_word2vec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ":1: missing header");
  long count = 0;
  int dim = 0;
  {
    std::istringstream hdr(line);
    if (!(hdr >> count >> dim) || count < 0 || dim <= 0) {
      throw std::invalid_argument(path + ":1: header must be 'count dim'");
    }
  }
  EmbeddingMatrix m;
  m.dim = dim;
  std::vector<std::string> tokens;
  std::vector<float> rows;
  rows.reserve(static_cast<size_t>(count) * dim);
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    std::vector<float> vals;
    vals.reserve(dim);
    std::string fld;
    while (ls >> fld) {
      char* end = nullptr;
      const float v = std::strtof(fld.c_str(), &end);
      if (end == fld.c_str() || *end != '\0') {
        throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": bad float '" + fld + "'");
      }
      vals.push_back(v);
    }
    if (static_cast<int>(vals.size()) != dim) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(dim) + " floats, got " +
                                  std::to_string(vals.size()));
    }
    tokens.push_back(tok);
    rows.insert(rows.end(), vals.begin(), vals.end());
  }
  if (static_cast<long>(tokens.size()) != count) {
    throw std::invalid_argument(path + ": header count " + std::to_string(count) + " but " +
                                std::to_string(tokens.size()) + " rows");
  }
  for (const auto& t : tokens) m.vocab.add(t);
  m.vectors.assign(static_cast<size_t>(m.vocab.size()) * dim, 0.0f);
  for (size_t i = 0; i < tokens.size(); ++i) {
    std::memcpy(m.row(static_cast<int>(i) + Vocabulary::kNumSpecials), rows.data() + i * dim, sizeof(float) * dim);
  }
  m.validate();
  return m;
}

void save_word2vec(const EmbeddingMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write embedding file: " + path);
  const int n_words = m.vocab.size() - Vocabulary::kNumSpecials;
  out << n_words << ' ' << m.dim << '\n';
  char buf[64];
  for (int i = Vocabulary::kNumSpecials; i < m.vocab.size(); ++i) {
    out << m.vocab.token(i);
    const float* row = m.row(i);
    for (int d = 0; d < m.dim; ++d) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(row[d]));
      out << ' ' << buf;
    }
    out << '\n';
  }
}

nn::Mat embed_sequence(const std::vector<std::string>& tokens, const EmbeddingMatrix& m,
                       int max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  nn::Mat out(max_len, m.dim);
  const int n = std::min<int>(static_cast<int>(tokens.size()), max_len);
  for (int i = 0; i < n; ++i) {
    const int idx = m.vocab.index(tokens[i]);
    const float* src = m.row(idx);
    double* dst = out.row(i);
    for (int d = 0; d < m.dim; ++d) dst[d] = static_cast<double>(src[d]);
  }
  return out;
}

// -------------------------------------------------------------------- CBOW ---

namespace {

inline float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

}  // namespace

CbowResult train_cbow(const std::vector<std::vector<std::string>>& corpus, const CbowParams& p) {
  if (p.dim < 1) throw std::invalid_argument("cbow dim must be >= 1");
  if (p.window < 1) throw std::invalid_argument("cbow window must be >= 1");
  Vocabulary vocab = Vocabulary::build(corpus, p.min_count);

  // token ids per sentence, OOV dropped
  std::vector<std::vector<int>> sents;
  std::vector<long> freq(vocab.size(), 0);
  long total_words = 0;
  for (const auto& sent : corpus) {
    std::vector<int> ids;
    for (const auto& tok : sent) {
      const int idx = vocab.index(tok);
      if (idx != Vocabulary::kUnk) {
        ids.push_back(idx);
        ++freq[idx];
        ++total_words;
      }
    }
    if (!ids.empty()) sents.push_back(std::move(ids));
  }
  if (total_words <= p.window) {
    throw std::invalid_argument("cbow corpus smaller than the context window");
  }

  // unigram^0.75 cumulative table for negative sampling
  std::vector<double> cumulative(vocab.size(), 0.0);
  double z = 0.0;
  for (int i = Vocabulary::kNumSpecials; i < vocab.size(); ++i) z += std::pow(static_cast<double>(freq[i]), 0.75);
  double running = 0.0;
  for (int i = 0; i < vocab.size(); ++i) {
    if (i >= Vocabulary::kNumSpecials) running += std::pow(static_cast<double>(freq[i]), 0.75) / z;
    cumulative[i] = running;
  }

  Rng rng(p.seed);
  EmbeddingMatrix m;
  m.vocab = vocab;
  m.dim = p.dim;
  m.vectors.assign(static_cast<size_t>(vocab.size()) * p.dim, 0.0f);
  const float half = 0.5f / p.dim;
  for (int i = Vocabulary::kNumSpecials; i < vocab.size(); ++i) {
    float* row = m.row(i);
    for (int d = 0; d < p.dim; ++d) row[d] = static_cast<float>(rng.uniform(-half, half));
  }
  std::vector<float> syn1(static_cast<size_t>(vocab.size()) * p.dim, 0.0f);

  auto sample_negative = [&](int exclude) {
    for (;;) {
      const double u = rng.uniform();
      int lo = 0, hi = vocab.size() - 1;
      while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (cumulative[mid] < u) {
          lo = mid + 1;
        } else {
          hi = mid;
        }
      }
      if (lo >= Vocabulary::kNumSpecials && lo != exclude) return lo;
    }
  };

  CbowResult res;
  std::vector<float> neu1(p.dim), neu1e(p.dim);
  const long total_steps = static_cast<long>(p.epochs) * total_words;
  long processed = 0;
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    double loss_sum = 0.0;
    long loss_n = 0;
    for (const auto& ids : sents) {
      const int n = static_cast<int>(ids.size());
      for (int pos = 0; pos < n; ++pos, ++processed) {
        const float lr = std::max(p.lr * (1.0f - static_cast<float>(processed) / (total_steps + 1)),
                                  p.lr * 1e-4f);
        const int shrink = static_cast<int>(rng.uniform_int(p.window));
        const int lo = std::max(0, pos - p.window + shrink);
        const int hi = std::min(n - 1, pos + p.window - shrink);
        int cw = 0;
        std::fill(neu1.begin(), neu1.end(), 0.0f);
        for (int c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          const float* row = m.row(ids[c]);
          for (int d = 0; d < p.dim; ++d) neu1[d] += row[d];
          ++cw;
        }
        if (cw == 0) continue;
        for (int d = 0; d < p.dim; ++d) neu1[d] /= cw;
        std::fill(neu1e.begin(), neu1e.end(), 0.0f);
        for (int k = 0; k <= p.negatives; ++k) {
          const int target = (k == 0) ? ids[pos] : sample_negative(ids[pos]);
          const float label = (k == 0) ? 1.0f : 0.0f;
          float* trow = syn1.data() + static_cast<size_t>(target) * p.dim;
          float f = 0.0f;
          for (int d = 0; d < p.dim; ++d) f += neu1[d] * trow[d];
          const float pred = sigmoidf(f);
          const float g = (label - pred) * lr;
          loss_sum += -std::log(std::max(1e-7f, label == 1.0f ? pred : 1.0f - pred));
          ++loss_n;
          for (int d = 0; d < p.dim; ++d) neu1e[d] += g * trow[d];
          for (int d = 0; d < p.dim; ++d) trow[d] += g * neu1[d];
        }
        for (int c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          float* row = m.row(ids[c]);
          for (int d = 0; d < p.dim; ++d) row[d] += neu1e[d];
        }
      }
    }
    res.epoch_loss.push_back(loss_n ? loss_sum / loss_n : 0.0);
  }
  m.validate();
  res.matrix = std::move(m);
  return res;
}

}  // namespace hsd
