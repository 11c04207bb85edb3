#include "hsd/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

#include "hsd/eval.hpp"

namespace hsd {

void SubmodelReport::validate() const {
  if (dev_f1 < 0.0 || dev_f1 > 1.0) {
    throw std::invalid_argument("report " + id + ": F1 outside [0,1]");
  }
  if (probs.rows != static_cast<int>(sample_ids.size()) || probs.cols != kNumClasses) {
    throw std::invalid_argument("report " + id + ": probability shape mismatch");
  }
  for (int r = 0; r < probs.rows; ++r) {
    double sum = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      const double p = probs.at(r, c);
      if (p < 0.0) throw std::invalid_argument("report " + id + ": negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument("report " + id + ": probability row does not sum to 1");
    }
  }
}

std::vector<std::string> select_models(const std::vector<SubmodelReport>& reports,
                                       double threshold) {
  if (threshold < 0.0 || threshold > 1.0) {
    throw std::invalid_argument("gate threshold must be in [0,1]");
  }
  std::vector<std::string> selected;
  for (const auto& r : reports) {
    if (r.dev_f1 > threshold) selected.push_back(r.id);
  }
  std::sort(selected.begin(), selected.end());
  if (selected.empty()) {
    throw std::runtime_error("no models pass gate (threshold " + std::to_string(threshold) + ")");
  }
  return selected;
}

EnsembleFeatures build_features(const std::vector<std::string>& selected,
                                const std::vector<SubmodelReport>& reports) {
  if (selected.empty()) throw std::invalid_argument("build_features: empty selection");
  if (std::set<std::string>(selected.begin(), selected.end()).size() != selected.size()) {
    throw std::invalid_argument("build_features: duplicate model ids in selection");
  }
  std::vector<const SubmodelReport*> picked;
  for (const auto& id : selected) {
    const SubmodelReport* found = nullptr;
    for (const auto& r : reports) {
      if (r.id == id) {
        found = &r;
        break;
      }
    }
    if (!found) throw std::invalid_argument("build_features: no report for model " + id);
    found->validate();
    picked.push_back(found);
  }
  EnsembleFeatures out;
  out.model_ids = selected;
  std::sort(out.model_ids.begin(), out.model_ids.end());
  // re-pick in canonical order
  std::vector<const SubmodelReport*> ordered;
  for (const auto& id : out.model_ids) {
    for (const SubmodelReport* r : picked) {
      if (r->id == id) ordered.push_back(r);
    }
  }
  out.sample_ids = ordered.front()->sample_ids;
  for (const SubmodelReport* r : ordered) {
    if (r->sample_ids != out.sample_ids) {
      throw std::invalid_argument("build_features: dev sample mismatch between " +
                                  ordered.front()->id + " and " + r->id);
    }
  }
  const int n = static_cast<int>(out.sample_ids.size());
  const int m = static_cast<int>(ordered.size());
  out.x = nn::Mat(n, kNumClasses * m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      std::memcpy(out.x.row(i) + j * kNumClasses, ordered[j]->probs.row(i),
                  sizeof(double) * kNumClasses);
    }
  }
  return out;
}

StackerResult train_stacker(const nn::Mat& features, const std::vector<ClassLabel>& labels,
                            const ClassWeights& w, uint64_t seed) {
  if (features.rows != static_cast<int>(labels.size())) {
    throw std::invalid_argument("train_stacker: features/labels length mismatch");
  }
  if (features.rows < 2) throw std::invalid_argument("train_stacker: need at least 2 samples");
  std::set<ClassLabel> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    throw std::invalid_argument("train_stacker: need at least 2 classes present");
  }

  ModelConfig cfg;
  cfg.arch = Arch::TextCnn;  // unused by the adapter path
  cfg.embedding_id = "stacker";
  cfg.sentence_input = true;
  cfg.emb_dim = features.cols;
  cfg.dense_hidden = 128;
  cfg.seed = seed;

  // Internal 80/20 stratified early-stop split. Classes with a single
  // sample keep it on the training side.
  std::vector<int> fit_idx, stop_idx;
  std::array<std::vector<int>, kNumClasses> by_class;
  for (size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<int>(labels[i])].push_back(static_cast<int>(i));
  }
  Rng rng(seed);
  for (int c = 0; c < kNumClasses; ++c) {
    auto idx = by_class[c];
    if (idx.empty()) continue;
    Rng class_rng = rng.fork(c);
    class_rng.shuffle(idx);
    long take = std::lround(0.8 * static_cast<double>(idx.size()));
    take = std::max<long>(1, std::min<long>(take, static_cast<long>(idx.size())));
    if (take == static_cast<long>(idx.size()) && idx.size() > 1) --take;
    for (size_t k = 0; k < idx.size(); ++k) {
      (static_cast<long>(k) < take ? fit_idx : stop_idx).push_back(idx[k]);
    }
  }
  if (stop_idx.empty()) stop_idx = fit_idx;

  auto subset = [&](const std::vector<int>& idx) {
    std::vector<std::vector<double>> vecs;
    std::vector<ClassLabel> ls;
    vecs.reserve(idx.size());
    for (int i : idx) {
      vecs.emplace_back(features.row(i), features.row(i) + features.cols);
      ls.push_back(labels[i]);
    }
    return std::make_pair(EmbeddedData(std::move(vecs)), std::move(ls));
  };
  auto [fit_data, fit_labels] = subset(fit_idx);
  auto [stop_data, stop_labels] = subset(stop_idx);

  StackerResult res;
  res.config = cfg;
  res.model = make_classifier(cfg);
  train_model(*res.model, cfg, fit_data, fit_labels, stop_data, stop_labels, w);

  // fit macro-F1 on the full given set
  std::vector<int> all_idx(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) all_idx[i] = static_cast<int>(i);
  auto [all_data, all_labels] = subset(all_idx);
  nn::Mat probs = predict_probs(*res.model, all_data);
  std::vector<ClassLabel> preds(probs.rows);
  for (int i = 0; i < probs.rows; ++i) {
    preds[i] = severity_argmax({probs.at(i, 0), probs.at(i, 1), probs.at(i, 2)});
  }
  res.fit_f1 = f1_macro(preds, all_labels);
  return res;
}

ProbabilityTriple stacker_predict(Classifier& stacker, const std::vector<double>& feature_row) {
  nn::SeqBatch b(1, 1, static_cast<int>(feature_row.size()));
  std::copy(feature_row.begin(), feature_row.end(), b.step(0, 0));
  Rng dummy(0);
  nn::Mat probs = stacker.forward(b, false, dummy);
  return {probs.at(0, 0), probs.at(0, 1), probs.at(0, 2)};
}

}  // namespace hsd
