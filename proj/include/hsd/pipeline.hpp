#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hsd/embedding.hpp"
#include "hsd/ensemble.hpp"
#include "hsd/mlm.hpp"
#include "hsd/models.hpp"
#include "hsd/textnorm.hpp"
#include "hsd/tokenize.hpp"

namespace hsd {

// Featurization resources + trained classifier for one ensemble member.
struct SubmodelRuntime {
  std::string id;
  ModelConfig cfg;
  std::unique_ptr<Classifier> model;
  TokenizerKind tokenizer = TokenizerKind::Space;
  std::shared_ptr<BpeMergeTable> merges;
  std::shared_ptr<SegmenterLexicon> lexicon;
  std::shared_ptr<EmbeddingMatrix> embedding;  // sequence input
  std::shared_ptr<SentenceEncoder> encoder;    // sentence input

  std::vector<std::string> tokenize_text(const std::string& cleaned) const;
  nn::SeqBatch featurize(const std::string& cleaned) const;
  ProbabilityTriple predict(const std::string& cleaned);
};

// A loaded ensemble manifest: cleaning config, sub-models in canonical id
// order, and the stacker.
class EnsembleRuntime {
 public:
  static EnsembleRuntime load(const std::string& manifest_path);

  // clean -> per-model featurization -> probabilities -> stacker -> label.
  std::pair<ProbabilityTriple, ClassLabel> predict(const std::string& raw_text);

  const std::vector<SubmodelRuntime>& submodels() const { return submodels_; }
  const textnorm::NormalizationConfig& normalization() const { return norm_; }
  double threshold() const { return threshold_; }

  textnorm::NormalizationConfig norm_;
  std::vector<SubmodelRuntime> submodels_;
  std::unique_ptr<Classifier> stacker_;
  ModelConfig stacker_cfg_;
  double threshold_ = 0.0;
};

}  // namespace hsd
