#include "hsd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "hsd/rng.hpp"
#include "hsd/tokenize.hpp"

namespace hsd {

std::string escape_text(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_text(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      switch (s[i + 1]) {
        case 't': out.push_back('\t'); ++i; continue;
        case 'n': out.push_back('\n'); ++i; continue;
        case '\\': out.push_back('\\'); ++i; continue;
        default: break;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  Dataset data;
  std::set<std::string> ids;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected id<TAB>label<TAB>text");
    }
    LabeledComment row;
    row.id = line.substr(0, t1);
    row.label = parse_class(line.substr(t1 + 1, t2 - t1 - 1));
    row.text = unescape_text(line.substr(t2 + 1));
    if (!ids.insert(row.id).second) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": duplicate id '" +
                                  row.id + "'");
    }
    data.push_back(std::move(row));
  }
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  for (const auto& row : data) {
    out << row.id << '\t' << class_name(row.label) << '\t' << escape_text(row.text) << '\n';
  }
}

DatasetStats class_distribution(const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("class_distribution: empty dataset");
  DatasetStats st;
  st.total = static_cast<long>(data.size());
  for (const auto& row : data) ++st.counts[static_cast<int>(row.label)];
  for (int c = 0; c < kNumClasses; ++c) {
    st.fractions[c] = static_cast<double>(st.counts[c]) / st.total;
  }
  return st;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double train_frac,
                                             uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac <= 1.0)) {
    throw std::invalid_argument("train_frac must be in (0, 1]");
  }
  std::array<std::vector<int>, kNumClasses> by_class;
  for (size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<int>(data[i].label)].push_back(static_cast<int>(i));
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (by_class[c].size() < 2) {
      throw std::invalid_argument(std::string("stratified_split: class '") +
                                  class_name(static_cast<ClassLabel>(c)) +
                                  "' has fewer than 2 samples");
    }
  }
  // Largest-remainder allocation of train seats, ties by class index.
  const long target_total = std::llround(train_frac * static_cast<double>(data.size()));
  std::array<long, kNumClasses> take{};
  std::array<double, kNumClasses> remainder{};
  long base_sum = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double quota = train_frac * static_cast<double>(by_class[c].size());
    take[c] = static_cast<long>(std::floor(quota));
    remainder[c] = quota - static_cast<double>(take[c]);
    base_sum += take[c];
  }
  long seats = target_total - base_sum;
  std::array<int, kNumClasses> by_rem{0, 1, 2};
  std::stable_sort(by_rem.begin(), by_rem.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (int k = 0; k < kNumClasses && seats > 0; ++k) {
    const int c = by_rem[k];
    if (take[c] < static_cast<long>(by_class[c].size())) {
      ++take[c];
      --seats;
    }
  }

  Rng rng(seed);
  std::vector<char> in_train(data.size(), 0);
  for (int c = 0; c < kNumClasses; ++c) {
    Rng class_rng = rng.fork(c);
    std::vector<int> idx = by_class[c];
    class_rng.shuffle(idx);
    for (long k = 0; k < take[c]; ++k) in_train[idx[k]] = 1;
  }
  Dataset train, dev;
  for (size_t i = 0; i < data.size(); ++i) {
    (in_train[i] ? train : dev).push_back(data[i]);
  }
  return {std::move(train), std::move(dev)};
}

double f1_macro(const std::vector<ClassLabel>& preds, const std::vector<ClassLabel>& golds) {
  if (preds.size() != golds.size()) {
    throw std::invalid_argument("f1_macro: preds/golds length mismatch");
  }
  if (preds.empty()) throw std::invalid_argument("f1_macro: empty input");
  const ConfusionMatrix cm = confusion(preds, golds);
  double sum = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    const long tp = cm.m[c][c];
    long fp = 0, fn = 0;
    for (int o = 0; o < kNumClasses; ++o) {
      if (o == c) continue;
      fp += cm.m[o][c];
      fn += cm.m[c][o];
    }
    const double precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double f1 =
        (precision + recall > 0.0) ? 2.0 * precision * recall / (precision + recall) : 0.0;
    sum += f1;
  }
  return sum / kNumClasses;
}

ConfusionMatrix confusion(const std::vector<ClassLabel>& preds,
                          const std::vector<ClassLabel>& golds) {
  if (preds.size() != golds.size()) {
    throw std::invalid_argument("confusion: preds/golds length mismatch");
  }
  ConfusionMatrix cm;
  cm.total = static_cast<long>(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    ++cm.m[static_cast<int>(golds[i])][static_cast<int>(preds[i])];
  }
  return cm;
}

double token_error_share(const Dataset& data, const std::vector<ClassLabel>& preds,
                         ClassLabel from_class, ClassLabel to_class, const std::string& token,
                         const textnorm::NormalizationConfig& norm) {
  if (token.empty()) throw std::invalid_argument("token_error_share: empty token");
  if (preds.size() != data.size()) {
    throw std::invalid_argument("token_error_share: preds/dataset length mismatch");
  }
  long errors = 0, with_token = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    if (data[i].label != from_class || preds[i] != to_class) continue;
    ++errors;
    const auto toks = tokenize_space(textnorm::clean(data[i].text, norm));
    if (std::find(toks.begin(), toks.end(), token) != toks.end()) ++with_token;
  }
  return errors ? static_cast<double>(with_token) / errors : 0.0;
}

}  // namespace hsd
