#include "hsd/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hsd/embedding.hpp"
#include "hsd/ensemble.hpp"
#include "hsd/eval.hpp"
#include "hsd/mlm.hpp"
#include "hsd/rng.hpp"
#include "hsd/sha256.hpp"
#include "hsd/textnorm.hpp"
#include "hsd/tokenize.hpp"

namespace fs = std::filesystem;

namespace hsd {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

using Section = std::map<std::string, std::string>;

std::map<std::string, Section> parse_ini(const std::string& content, const std::string& origin) {
  std::map<std::string, Section> sections;
  std::string current = "experiment";
  std::istringstream in(content);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": unclosed section");
      }
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty()) {
        throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": empty section name");
      }
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    sections[current][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return sections;
}

double to_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': bad number '" + v + "'");
  }
}

long to_long(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': bad integer '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config key '" + key + "': bad boolean '" + v + "'");
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename F>
auto stage(const std::string& name, F&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error("stage " + name + ": " + e.what());
  }
}

}  // namespace

// ------------------------------------------------------------ config load ---

ExperimentConfig ExperimentConfig::parse(const std::string& content, const std::string& origin) {
  auto sections = parse_ini(content, origin);
  ExperimentConfig cfg;
  auto exp = sections.find("experiment");
  if (exp == sections.end()) throw std::invalid_argument(origin + ": missing [experiment] section");
  for (const auto& [key, value] : exp->second) {
    if (key == "dataset") {
      cfg.dataset_path = value;
    } else if (key == "out") {
      cfg.out_dir = value;
    } else if (key == "lexicon") {
      cfg.lexicon_path = value;
    } else if (key == "emoticons") {
      cfg.emoticons_path = (value == "builtin") ? "" : value;
    } else if (key == "separate_punct") {
      cfg.separate_punct = to_bool(value, key);
    } else if (key == "train_frac") {
      cfg.train_frac = to_double(value, key);
    } else if (key == "split_seed") {
      cfg.split_seed = static_cast<uint64_t>(to_long(value, key));
    } else if (key == "seed") {
      cfg.seed = static_cast<uint64_t>(to_long(value, key));
    } else if (key == "threshold") {
      cfg.threshold = to_double(value, key);
    } else if (key == "max_len") {
      cfg.max_len = static_cast<int>(to_long(value, key));
    } else if (key == "weights") {
      auto parts = split_list(value, ',');
      if (parts.size() != 3) {
        throw std::invalid_argument(origin + ": weights must be three comma-separated numbers");
      }
      for (int c = 0; c < kNumClasses; ++c) cfg.weights.w[c] = to_double(parts[c], key);
    } else if (key == "cells") {
      for (const auto& cell : split_list(value, ',')) {
        const size_t colon = cell.find(':');
        if (colon == std::string::npos) {
          throw std::invalid_argument(origin + ": cell '" + cell + "' must be arch:embedding");
        }
        cfg.cells.emplace_back(trim(cell.substr(0, colon)), trim(cell.substr(colon + 1)));
      }
    } else {
      throw std::invalid_argument(origin + ": unknown key '" + key + "' in [experiment]");
    }
  }

  if (auto it = sections.find("model"); it != sections.end()) {
    ModelConfig& m = cfg.model_defaults;
    for (const auto& [key, value] : it->second) {
      if (key == "hidden") m.hidden = static_cast<int>(to_long(value, key));
      else if (key == "filters") m.filters = static_cast<int>(to_long(value, key));
      else if (key == "kernel_sizes") {
        m.kernel_sizes.clear();
        for (const auto& k : split_list(value, ',')) m.kernel_sizes.push_back(static_cast<int>(to_long(k, key)));
      } else if (key == "vdcnn_blocks") m.vdcnn_blocks = static_cast<int>(to_long(value, key));
      else if (key == "vdcnn_channels") m.vdcnn_channels = static_cast<int>(to_long(value, key));
      else if (key == "attn_dim") m.attn_dim = static_cast<int>(to_long(value, key));
      else if (key == "dense_hidden") m.dense_hidden = static_cast<int>(to_long(value, key));
      else if (key == "dropout") m.dropout = to_double(value, key);
      else if (key == "lr") m.lr = to_double(value, key);
      else if (key == "batch_size") m.batch_size = static_cast<int>(to_long(value, key));
      else if (key == "max_epochs") m.max_epochs = static_cast<int>(to_long(value, key));
      else if (key == "patience") m.patience = static_cast<int>(to_long(value, key));
      else throw std::invalid_argument(origin + ": unknown key '" + key + "' in [model]");
    }
  }

  for (const auto& [name, kv] : sections) {
    if (name.rfind("embedding ", 0) != 0) continue;
    EmbeddingSpec spec;
    spec.name = trim(name.substr(10));
    if (spec.name.empty()) throw std::invalid_argument(origin + ": embedding section without name");
    for (const auto& [key, value] : kv) {
      if (key == "kind") spec.kind = value;
      else if (key == "tokenizer") spec.tokenizer = parse_tokenizer(value);
      else if (key == "dim") spec.dim = static_cast<int>(to_long(value, key));
      else if (key == "seed") spec.seed = static_cast<uint64_t>(to_long(value, key));
      else if (key == "window") spec.window = static_cast<int>(to_long(value, key));
      else if (key == "negatives") spec.negatives = static_cast<int>(to_long(value, key));
      else if (key == "epochs") spec.epochs = static_cast<int>(to_long(value, key));
      else if (key == "min_count") spec.min_count = static_cast<int>(to_long(value, key));
      else if (key == "bpe_merges") spec.bpe_merges = static_cast<int>(to_long(value, key));
      else if (key == "layers") spec.layers = static_cast<int>(to_long(value, key));
      else if (key == "heads") spec.heads = static_cast<int>(to_long(value, key));
      else if (key == "ff_dim") spec.ff_dim = static_cast<int>(to_long(value, key));
      else if (key == "lr") spec.lr = to_double(value, key);
      else if (key == "batch_size") spec.batch_size = static_cast<int>(to_long(value, key));
      else if (key == "path") spec.path = value;
      else throw std::invalid_argument(origin + ": unknown key '" + key + "' in [" + name + "]");
    }
    if (spec.kind != "cbow" && spec.kind != "mlm" && spec.kind != "pretrained") {
      throw std::invalid_argument(origin + ": embedding '" + spec.name + "': unknown kind '" +
                                  spec.kind + "'");
    }
    cfg.embeddings[spec.name] = spec;
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  ExperimentConfig cfg = parse(slurp(path), path);
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (dataset_path.empty()) throw std::invalid_argument("config: dataset path missing");
  if (!fs::exists(dataset_path)) throw std::invalid_argument("config: dataset not found: " + dataset_path);
  if (cells.empty()) throw std::invalid_argument("config: no cells to train");
  weights.validate();
  if (threshold < 0.0 || threshold > 1.0) throw std::invalid_argument("config: threshold must be in [0,1]");
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw std::invalid_argument("config: train_frac must be in (0,1)");
  }
  if (max_len < 1) throw std::invalid_argument("config: max_len must be >= 1");
  bool needs_lexicon = false;
  for (const auto& [arch, emb] : cells) {
    parse_arch(arch);
    auto it = embeddings.find(emb);
    if (it == embeddings.end()) {
      throw std::invalid_argument("config: cell references undefined embedding '" + emb + "'");
    }
    if (it->second.tokenizer == TokenizerKind::Segmented) needs_lexicon = true;
    if (it->second.kind == "pretrained") {
      if (it->second.path.empty() || !fs::exists(it->second.path)) {
        throw std::invalid_argument("config: pretrained embedding file not found for '" + emb + "'");
      }
    }
  }
  if (needs_lexicon && (lexicon_path.empty() || !fs::exists(lexicon_path))) {
    throw std::invalid_argument("config: segmented tokenizer needs an existing lexicon file");
  }
  if (!emoticons_path.empty() && !fs::exists(emoticons_path)) {
    throw std::invalid_argument("config: emoticon dictionary not found: " + emoticons_path);
  }
}

// --------------------------------------------------------- run_experiment ---

namespace {

struct BuiltEmbedding {
  EmbeddingSpec spec;
  std::shared_ptr<EmbeddingMatrix> matrix;       // cbow / pretrained
  std::shared_ptr<SentenceEncoder> encoder;      // mlm
  std::shared_ptr<BpeMergeTable> merges;         // tokenizer == bpe
  std::shared_ptr<SegmenterLexicon> lexicon;     // tokenizer == segmented
  std::string file_rel;                          // .vec or .encoder.json under out/
  std::string merges_rel;
  std::string lexicon_rel;

  std::vector<std::string> tokenize_text(const std::string& cleaned) const {
    TokenizerResources res;
    res.merges = merges.get();
    res.lexicon = lexicon.get();
    return hsd::tokenize(cleaned, spec.tokenizer, res);
  }
};

std::string cell_file_stem(const std::string& arch, const std::string& emb) {
  std::string s = arch + "_" + emb;
  for (char& c : s) {
    if (c == ':' || c == '/' || c == ' ') c = '_';
  }
  return s;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const fs::path out(config.out_dir);
  fs::create_directories(out);

  // cleaning config
  textnorm::NormalizationConfig norm = textnorm::NormalizationConfig::defaults();
  norm.separate_punct = config.separate_punct;
  if (!config.emoticons_path.empty()) {
    norm.emoticons = textnorm::EmoticonDictionary::load(config.emoticons_path);
  }

  Dataset raw = stage("load-dataset", [&] { return load_dataset(config.dataset_path); });

  Dataset cleaned = stage("clean", [&] {
    Dataset c = raw;
    for (auto& row : c) row.text = textnorm::clean(row.text, norm);
    save_dataset(c, (out / "cleaned.tsv").string());
    return c;
  });

  auto [train_set, dev_set] = stage("split", [&] {
    auto parts = stratified_split(cleaned, config.train_frac, config.split_seed);
    save_dataset(parts.first, (out / "train.tsv").string());
    save_dataset(parts.second, (out / "dev.tsv").string());
    return parts;
  });

  std::vector<ClassLabel> train_labels, dev_labels;
  std::vector<std::string> dev_ids;
  for (const auto& r : train_set) train_labels.push_back(r.label);
  for (const auto& r : dev_set) {
    dev_labels.push_back(r.label);
    dev_ids.push_back(r.id);
  }

  // unique embeddings used by the configured cells
  std::set<std::string> emb_names;
  for (const auto& [arch, emb] : config.cells) emb_names.insert(emb);

  std::map<std::string, BuiltEmbedding> built;
  stage("embeddings", [&] {
    std::vector<std::string> all_texts;
    for (const auto& r : cleaned) all_texts.push_back(r.text);
    std::shared_ptr<SegmenterLexicon> shared_lexicon;
    std::string lexicon_rel;
    for (const auto& name : emb_names) {
      BuiltEmbedding be;
      be.spec = config.embeddings.at(name);
      if (be.spec.tokenizer == TokenizerKind::Segmented) {
        if (!shared_lexicon) {
          shared_lexicon = std::make_shared<SegmenterLexicon>(SegmenterLexicon::load(config.lexicon_path));
          lexicon_rel = "lexicon.txt";
          write_file(out / lexicon_rel, slurp(config.lexicon_path));
        }
        be.lexicon = shared_lexicon;
        be.lexicon_rel = lexicon_rel;
      }
      if (be.spec.tokenizer == TokenizerKind::Bpe) {
        std::vector<std::vector<std::string>> words;
        for (const auto& t : all_texts) words.push_back(tokenize_space(t));
        be.merges = std::make_shared<BpeMergeTable>(learn_bpe(words, be.spec.bpe_merges));
        be.merges_rel = "emb/" + name + ".merges.txt";
        be.merges->save((out / be.merges_rel).string());
      }
      std::vector<std::vector<std::string>> corpus;
      for (const auto& t : all_texts) corpus.push_back(be.tokenize_text(t));

      if (be.spec.kind == "cbow") {
        CbowParams p;
        p.dim = be.spec.dim;
        p.window = be.spec.window;
        p.negatives = be.spec.negatives;
        p.epochs = be.spec.epochs;
        p.min_count = be.spec.min_count;
        p.seed = be.spec.seed;
        be.matrix = std::make_shared<EmbeddingMatrix>(train_cbow(corpus, p).matrix);
        be.file_rel = "emb/" + name + ".vec";
        fs::create_directories(out / "emb");
        save_word2vec(*be.matrix, (out / be.file_rel).string());
      } else if (be.spec.kind == "pretrained") {
        be.matrix = std::make_shared<EmbeddingMatrix>(load_word2vec(be.spec.path));
        be.file_rel = "emb/" + name + ".vec";
        fs::create_directories(out / "emb");
        save_word2vec(*be.matrix, (out / be.file_rel).string());
      } else {  // mlm
        MlmConfig mc;
        mc.dim = be.spec.dim;
        mc.layers = be.spec.layers;
        mc.heads = be.spec.heads;
        mc.ff_dim = be.spec.ff_dim;
        mc.max_len = config.max_len;
        mc.lr = be.spec.lr;
        mc.batch_size = be.spec.batch_size;
        mc.epochs = be.spec.epochs;
        mc.seed = be.spec.seed;
        Vocabulary vocab = Vocabulary::build(corpus, be.spec.min_count);
        auto enc = std::make_shared<SentenceEncoder>(std::move(vocab), mc);
        enc->train(corpus);
        be.encoder = enc;
        be.file_rel = "emb/" + name + ".encoder.json";
        write_json(out / be.file_rel, enc->to_json());
      }
      built.emplace(name, std::move(be));
    }
    return 0;
  });

  // per-cell training
  std::vector<CellResult> cell_results;
  std::vector<SubmodelReport> reports;
  nlohmann::json manifest_submodels = nlohmann::json::array();
  stage("cells", [&] {
    for (const auto& [arch_s, emb_s] : config.cells) {
      const std::string id = arch_s + ":" + emb_s;
      const BuiltEmbedding& be = built.at(emb_s);

      ModelConfig mc = config.model_defaults;
      mc.arch = parse_arch(arch_s);
      mc.embedding_id = emb_s;
      mc.max_len = config.max_len;
      mc.seed = Rng::splitmix(config.seed ^ fnv1a64(id));
      mc.sentence_input = (be.spec.kind == "mlm");
      mc.emb_dim = be.spec.kind == "mlm" ? be.encoder->config().dim : be.matrix->dim;

      auto embed_split = [&](const Dataset& rows) {
        if (mc.sentence_input) {
          std::vector<std::vector<double>> vecs;
          vecs.reserve(rows.size());
          for (const auto& r : rows) vecs.push_back(be.encoder->encode(be.tokenize_text(r.text)));
          return EmbeddedData(std::move(vecs));
        }
        std::vector<std::vector<int>> ids;
        ids.reserve(rows.size());
        for (const auto& r : rows) {
          std::vector<int> seq;
          for (const auto& tok : be.tokenize_text(r.text)) seq.push_back(be.matrix->vocab.index(tok));
          ids.push_back(std::move(seq));
        }
        return EmbeddedData(std::move(ids), &be.matrix->vectors, be.matrix->vocab.size(),
                            be.matrix->dim, mc.max_len);
      };
      EmbeddedData train_data = embed_split(train_set);
      EmbeddedData dev_data = embed_split(dev_set);

      auto model = make_classifier(mc);
      TrainResult tr = train_model(*model, mc, train_data, train_labels, dev_data, dev_labels,
                                   config.weights);

      std::vector<ClassLabel> preds(tr.dev_probs.rows);
      for (int i = 0; i < tr.dev_probs.rows; ++i) {
        preds[i] = severity_argmax({tr.dev_probs.at(i, 0), tr.dev_probs.at(i, 1), tr.dev_probs.at(i, 2)});
      }
      const double dev_f1 = f1_macro(preds, dev_labels);

      const std::string snap_rel = "cells/" + cell_file_stem(arch_s, emb_s) + ".model.json";
      write_json(out / snap_rel, model_snapshot(*model, mc, tr.best_dev_loss));

      CellResult cr;
      cr.id = id;
      cr.arch = arch_s;
      cr.embedding = emb_s;
      cr.dev_f1 = dev_f1;
      cr.best_dev_loss = tr.best_dev_loss;
      cr.best_epoch = tr.best_epoch;
      cr.epochs_run = tr.epochs_run;
      cr.snapshot_path = snap_rel;
      cell_results.push_back(cr);

      SubmodelReport rep;
      rep.id = id;
      rep.dev_f1 = dev_f1;
      rep.sample_ids = dev_ids;
      rep.probs = tr.dev_probs;
      rep.snapshot_path = snap_rel;
      reports.push_back(std::move(rep));

      nlohmann::json sj = {{"id", id},
                           {"snapshot", snap_rel},
                           {"tokenizer", tokenizer_name(be.spec.tokenizer)},
                           {"embedding", nullptr},
                           {"encoder", nullptr},
                           {"merges", nullptr},
                           {"lexicon", nullptr}};
      if (mc.sentence_input) {
        sj["encoder"] = be.file_rel;
      } else {
        sj["embedding"] = be.file_rel;
      }
      if (!be.merges_rel.empty()) sj["merges"] = be.merges_rel;
      if (!be.lexicon_rel.empty()) sj["lexicon"] = be.lexicon_rel;
      manifest_submodels.push_back(sj);
    }
    return 0;
  });

  std::vector<std::string> selected =
      stage("gate", [&] { return select_models(reports, config.threshold); });

  double stacker_fit_f1 = 0.0;
  stage("stacker", [&] {
    EnsembleFeatures features = build_features(selected, reports);
    StackerResult sr = train_stacker(features.x, dev_labels, config.weights,
                                     Rng::splitmix(config.seed ^ fnv1a64("stacker")));
    stacker_fit_f1 = sr.fit_f1;
    write_json(out / "stacker.model.json", model_snapshot(*sr.model, sr.config, 0.0));

    // keep only the gated sub-models in the ensemble manifest
    nlohmann::json gated = nlohmann::json::array();
    for (const auto& id : selected) {
      for (const auto& sj : manifest_submodels) {
        if (sj.at("id") == id) gated.push_back(sj);
      }
    }
    nlohmann::json manifest = {{"format", "hsd-ensemble-v1"},
                               {"threshold", config.threshold},
                               {"normalization",
                                {{"emoticons", config.emoticons_path.empty()
                                                   ? nlohmann::json(nullptr)
                                                   : nlohmann::json("emoticons.tsv")},
                                 {"separate_punct", config.separate_punct}}},
                               {"submodels", gated},
                               {"stacker", "stacker.model.json"}};
    if (!config.emoticons_path.empty()) {
      write_file(out / "emoticons.tsv", slurp(config.emoticons_path));
    }
    write_json(out / "ensemble.json", manifest);
    return 0;
  });

  ExperimentReport report;
  report.cells = cell_results;
  report.selected = selected;
  report.stacker_fit_f1 = stacker_fit_f1;
  report.ensemble_dev_f1 = stacker_fit_f1;

  stage("report", [&] {
    const DatasetStats stats = class_distribution(cleaned);
    nlohmann::json cells_j = nlohmann::json::array();
    for (const auto& c : cell_results) {
      cells_j.push_back({{"id", c.id},
                         {"arch", c.arch},
                         {"embedding", c.embedding},
                         {"dev_f1", c.dev_f1},
                         {"best_dev_loss", c.best_dev_loss},
                         {"best_epoch", c.best_epoch},
                         {"epochs_run", c.epochs_run},
                         {"snapshot", c.snapshot_path}});
    }
    report.json = {{"format", "hsd-report-v1"},
                   {"class_distribution",
                    {{"clean", stats.fractions[0]},
                     {"offensive", stats.fractions[1]},
                     {"hate", stats.fractions[2]},
                     {"total", stats.total}}},
                   {"split", {{"train", static_cast<long>(train_set.size())},
                              {"dev", static_cast<long>(dev_set.size())},
                              {"train_frac", config.train_frac}}},
                   {"cells", cells_j},
                   {"threshold", config.threshold},
                   {"selected", selected},
                   {"stacker_fit_f1", stacker_fit_f1},
                   {"ensemble_dev_f1", stacker_fit_f1},
                   {"weights", {{"clean", config.weights[0]},
                                {"offensive", config.weights[1]},
                                {"hate", config.weights[2]}}}};
    write_json(out / "report.json", report.json);
    return 0;
  });
  report.report_path = (out / "report.json").string();

  stage("manifest", [&] {
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(out)) {
      if (!entry.is_regular_file()) continue;
      const std::string rel = fs::relative(entry.path(), out).generic_string();
      if (rel == "manifest.json") continue;
      files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    nlohmann::json list = nlohmann::json::array();
    for (const auto& rel : files) {
      list.push_back({{"path", rel}, {"sha256", sha256_hex(slurp(out / rel))}});
    }
    write_json(out / "manifest.json", nlohmann::json{{"format", "hsd-manifest-v1"}, {"files", list}});
    return 0;
  });
  report.manifest_path = (out / "manifest.json").string();
  return report;
}

}  // namespace hsd
