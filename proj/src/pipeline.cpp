#include "hsd/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace hsd {

std::vector<std::string> SubmodelRuntime::tokenize_text(const std::string& cleaned) const {
  TokenizerResources res;
  res.merges = merges.get();
  res.lexicon = lexicon.get();
  return hsd::tokenize(cleaned, tokenizer, res);
}

nn::SeqBatch SubmodelRuntime::featurize(const std::string& cleaned) const {
  const std::vector<std::string> tokens = tokenize_text(cleaned);
  if (cfg.sentence_input) {
    if (!encoder) throw std::runtime_error("submodel " + id + ": missing sentence encoder");
    const std::vector<double> vec = encoder->encode(tokens);
    nn::SeqBatch b(1, 1, static_cast<int>(vec.size()));
    std::copy(vec.begin(), vec.end(), b.step(0, 0));
    return b;
  }
  if (!embedding) throw std::runtime_error("submodel " + id + ": missing embedding matrix");
  nn::SeqBatch b(1, cfg.max_len, embedding->dim);
  const nn::Mat rows = embed_sequence(tokens, *embedding, cfg.max_len);
  std::copy(rows.a.begin(), rows.a.end(), b.step(0, 0));
  b.len[0] = std::max(1, std::min<int>(static_cast<int>(tokens.size()), cfg.max_len));
  return b;
}

ProbabilityTriple SubmodelRuntime::predict(const std::string& cleaned) {
  Rng dummy(0);
  nn::Mat probs = model->forward(featurize(cleaned), false, dummy);
  return {probs.at(0, 0), probs.at(0, 1), probs.at(0, 2)};
}

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

std::string resolve(const fs::path& base, const std::string& rel) {
  if (rel.empty()) return rel;
  fs::path p(rel);
  if (p.is_absolute()) return rel;
  return (base / p).string();
}

}  // namespace

EnsembleRuntime EnsembleRuntime::load(const std::string& manifest_path) {
  const nlohmann::json j = load_json(manifest_path);
  if (j.value("format", "") != "hsd-ensemble-v1") {
    throw std::invalid_argument(manifest_path + ": not an ensemble manifest");
  }
  const fs::path base = fs::path(manifest_path).parent_path();

  EnsembleRuntime rt;
  rt.threshold_ = j.value("threshold", 0.0);
  rt.norm_ = textnorm::NormalizationConfig::defaults();
  if (j.contains("normalization")) {
    const auto& n = j.at("normalization");
    rt.norm_.separate_punct = n.value("separate_punct", true);
    if (n.contains("emoticons") && !n.at("emoticons").is_null()) {
      rt.norm_.emoticons =
          textnorm::EmoticonDictionary::load(resolve(base, n.at("emoticons").get<std::string>()));
    }
  }

  for (const auto& sj : j.at("submodels")) {
    SubmodelRuntime sm;
    sm.id = sj.at("id").get<std::string>();
    sm.model = load_snapshot(load_json(resolve(base, sj.at("snapshot").get<std::string>())),
                              &sm.cfg, nullptr);
    sm.tokenizer = parse_tokenizer(sj.at("tokenizer").get<std::string>());
    if (sj.contains("merges") && !sj.at("merges").is_null()) {
      sm.merges = std::make_shared<BpeMergeTable>(
          BpeMergeTable::load(resolve(base, sj.at("merges").get<std::string>())));
    }
    if (sj.contains("lexicon") && !sj.at("lexicon").is_null()) {
      sm.lexicon = std::make_shared<SegmenterLexicon>(
          SegmenterLexicon::load(resolve(base, sj.at("lexicon").get<std::string>())));
    }
    if (sj.contains("encoder") && !sj.at("encoder").is_null()) {
      sm.encoder = std::make_shared<SentenceEncoder>(
          SentenceEncoder::from_json(load_json(resolve(base, sj.at("encoder").get<std::string>()))));
    }
    if (sj.contains("embedding") && !sj.at("embedding").is_null()) {
      sm.embedding = std::make_shared<EmbeddingMatrix>(
          load_word2vec(resolve(base, sj.at("embedding").get<std::string>())));
    }
    if (sm.cfg.sentence_input && !sm.encoder) {
      throw std::invalid_argument("submodel " + sm.id + ": sentence input but no encoder listed");
    }
    if (!sm.cfg.sentence_input && !sm.embedding) {
      throw std::invalid_argument("submodel " + sm.id + ": sequence input but no embedding listed");
    }
    rt.submodels_.push_back(std::move(sm));
  }
  std::sort(rt.submodels_.begin(), rt.submodels_.end(),
            [](const SubmodelRuntime& a, const SubmodelRuntime& b) { return a.id < b.id; });

  rt.stacker_ = load_snapshot(load_json(resolve(base, j.at("stacker").get<std::string>())),
                              &rt.stacker_cfg_, nullptr);
  const int expect = kNumClasses * static_cast<int>(rt.submodels_.size());
  if (rt.stacker_cfg_.emb_dim != expect) {
    throw std::invalid_argument("stacker input width " + std::to_string(rt.stacker_cfg_.emb_dim) +
                                " does not match 3 x " + std::to_string(rt.submodels_.size()) +
                                " sub-models");
  }
  return rt;
}

std::pair<ProbabilityTriple, ClassLabel> EnsembleRuntime::predict(const std::string& raw_text) {
  const std::string cleaned = textnorm::clean(raw_text, norm_);
  std::vector<double> features;
  features.reserve(kNumClasses * submodels_.size());
  for (auto& sm : submodels_) {
    const ProbabilityTriple p = sm.predict(cleaned);
    features.insert(features.end(), p.begin(), p.end());
  }
  const ProbabilityTriple out = stacker_predict(*stacker_, features);
  return {out, severity_argmax(out)};
}

}  // namespace hsd
