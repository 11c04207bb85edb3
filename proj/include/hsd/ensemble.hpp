#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hsd/models.hpp"
#include "hsd/types.hpp"

namespace hsd {

// One trained (architecture x embedding) cell: its dev macro-F1 and its
// probability outputs on the dev set.
struct SubmodelReport {
  std::string id;  // "<arch>:<embedding>", unique
  double dev_f1 = 0.0;
  std::vector<std::string> sample_ids;  // dev samples, order fixed
  nn::Mat probs;                        // one row per dev sample
  std::string snapshot_path;
  void validate() const;
};

// Ids of reports with F1 strictly above the threshold, lexicographic order.
// Throws when nothing passes the gate.
std::vector<std::string> select_models(const std::vector<SubmodelReport>& reports,
                                       double threshold);

struct EnsembleFeatures {
  std::vector<std::string> model_ids;   // canonical order, defines slices
  std::vector<std::string> sample_ids;
  nn::Mat x;                            // n x (3 * model_ids.size())
};

// Concatenated probability triples of the selected models; the reports must
// cover identical dev samples in identical order.
EnsembleFeatures build_features(const std::vector<std::string>& selected,
                                const std::vector<SubmodelReport>& reports);

struct StackerResult {
  std::unique_ptr<Classifier> model;
  ModelConfig config;
  double fit_f1 = 0.0;  // macro-F1 on the full given set
};

// One-hidden-layer (width 128) dense stacker on the concatenated
// probabilities, trained with the weighted loss; early stopping on an
// internal 80/20 stratified split, fit F1 reported on the full input.
StackerResult train_stacker(const nn::Mat& features, const std::vector<ClassLabel>& labels,
                            const ClassWeights& w, uint64_t seed);

ProbabilityTriple stacker_predict(Classifier& stacker, const std::vector<double>& feature_row);

}  // namespace hsd
