#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsd/models.hpp"
#include "hsd/tokenize.hpp"
#include "hsd/types.hpp"

namespace hsd {

// One embedding definition from the experiment config.
struct EmbeddingSpec {
  std::string name;
  std::string kind = "cbow";  // cbow | mlm | pretrained
  TokenizerKind tokenizer = TokenizerKind::Space;
  int dim = 200;
  uint64_t seed = 1;
  // cbow
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  int min_count = 1;
  // bpe tokenizer
  int bpe_merges = 200;
  // mlm
  int layers = 2;
  int heads = 4;
  int ff_dim = 512;
  double lr = 5e-4;
  int batch_size = 16;
  // pretrained
  std::string path;
};

// Flat key=value configuration with [section] headers; `[experiment]` holds
// run-level settings, one `[embedding <name>]` section per embedding, and an
// optional `[model]` section of hyperparameter overrides.
struct ExperimentConfig {
  std::string dataset_path;
  std::string out_dir = "out";
  std::string lexicon_path;
  std::string emoticons_path;  // empty -> builtin dictionary
  bool separate_punct = true;
  double train_frac = 0.9;
  uint64_t split_seed = 13;
  ClassWeights weights{{0.09, 0.95, 0.96}};
  double threshold = 0.67;
  int max_len = 64;
  uint64_t seed = 42;
  std::vector<std::pair<std::string, std::string>> cells;  // (arch, embedding)
  std::map<std::string, EmbeddingSpec> embeddings;
  ModelConfig model_defaults;

  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig parse(const std::string& content, const std::string& origin);
  void validate() const;
};

struct CellResult {
  std::string id;
  std::string arch;
  std::string embedding;
  double dev_f1 = 0.0;
  double best_dev_loss = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::string snapshot_path;
};

struct ExperimentReport {
  std::vector<CellResult> cells;
  std::vector<std::string> selected;
  double stacker_fit_f1 = 0.0;
  double ensemble_dev_f1 = 0.0;
  nlohmann::json json;         // the full written report
  std::string report_path;
  std::string manifest_path;
};

// clean -> split -> embeddings -> per-cell training -> gate -> stacker ->
// evaluation; every artifact lands under config.out_dir with a hash manifest.
ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace hsd
