#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "hsd/textnorm.hpp"
#include "hsd/types.hpp"

namespace hsd {

struct LabeledComment {
  std::string id;
  std::string text;
  ClassLabel label = ClassLabel::Clean;
};

using Dataset = std::vector<LabeledComment>;

// Tab-separated rows `id<TAB>label<TAB>text`; tab/newline/backslash in text
// escaped as \t, \n, \\. Duplicate ids are rejected.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& data, const std::string& path);
std::string escape_text(const std::string& s);
std::string unescape_text(const std::string& s);

struct DatasetStats {
  std::array<long, kNumClasses> counts{};
  std::array<double, kNumClasses> fractions{};
  long total = 0;
};

DatasetStats class_distribution(const Dataset& data);  // error on empty

// Per class: largest-remainder allocation toward train_frac, ties by class
// index; shuffled within class by seed. Every class needs >= 2 samples.
std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double train_frac, uint64_t seed);

// Unweighted mean of per-class F1; P/R/F1 are 0 whenever their denominator
// is 0.
double f1_macro(const std::vector<ClassLabel>& preds, const std::vector<ClassLabel>& golds);

struct ConfusionMatrix {
  std::array<std::array<long, kNumClasses>, kNumClasses> m{};  // [gold][pred]
  long total = 0;
};

ConfusionMatrix confusion(const std::vector<ClassLabel>& preds,
                          const std::vector<ClassLabel>& golds);

// Among gold=from_class predicted as to_class, the share of samples whose
// space-tokenized cleaned text contains the token; 0 when no such errors.
double token_error_share(const Dataset& data, const std::vector<ClassLabel>& preds,
                         ClassLabel from_class, ClassLabel to_class, const std::string& token,
                         const textnorm::NormalizationConfig& norm);

}  // namespace hsd
