// Command-line front end wiring the pipeline modules together.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hsd/augment.hpp"
#include "hsd/embedding.hpp"
#include "hsd/ensemble.hpp"
#include "hsd/eval.hpp"
#include "hsd/experiment.hpp"
#include "hsd/kernels.hpp"
#include "hsd/mlm.hpp"
#include "hsd/models.hpp"
#include "hsd/pipeline.hpp"
#include "hsd/rng.hpp"
#include "hsd/textnorm.hpp"
#include "hsd/tokenize.hpp"

namespace fs = std::filesystem;
using namespace hsd;

namespace {

std::vector<std::string> read_input_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::string line;
  if (path.empty() || path == "-") {
    while (std::getline(std::cin, line)) lines.push_back(line);
    return lines;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open input: " + path);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::ostream& open_output(std::ofstream& file, const std::string& path) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open output: " + path);
  return file;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

textnorm::NormalizationConfig make_norm(const std::string& emoticons, bool separate_punct) {
  auto cfg = textnorm::NormalizationConfig::defaults();
  cfg.separate_punct = separate_punct;
  if (!emoticons.empty() && emoticons != "builtin") {
    cfg.emoticons = textnorm::EmoticonDictionary::load(emoticons);
  }
  return cfg;
}

ClassWeights parse_weights(const std::string& s) {
  ClassWeights w;
  std::stringstream ss(s);
  std::string part;
  int i = 0;
  while (std::getline(ss, part, ',') && i < kNumClasses) w.w[i++] = std::stod(part);
  if (i != kNumClasses) throw std::invalid_argument("--weights needs three comma-separated values");
  w.validate();
  return w;
}

std::vector<ClassLabel> read_pred_labels(const std::string& path) {
  std::vector<ClassLabel> preds;
  for (const auto& line : read_input_lines(path)) {
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    preds.push_back(parse_class(tab == std::string::npos ? line : line.substr(0, tab)));
  }
  return preds;
}

struct TokenizerFlags {
  std::string kind = "space";
  std::string merges_path;
  std::string lexicon_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--tokenizer", kind, "space|bpe|segmented")->capture_default_str();
    cmd->add_option("--merges", merges_path, "BPE merge table file (for --tokenizer bpe)");
    cmd->add_option("--lexicon", lexicon_path, "word lexicon file (for --tokenizer segmented)");
  }

  // loaded resources must outlive usage
  std::shared_ptr<BpeMergeTable> merges;
  std::shared_ptr<SegmenterLexicon> lexicon;
  TokenizerKind load() {
    TokenizerKind k = parse_tokenizer(kind);
    if (k == TokenizerKind::Bpe) {
      if (merges_path.empty()) throw std::invalid_argument("--tokenizer bpe requires --merges");
      merges = std::make_shared<BpeMergeTable>(BpeMergeTable::load(merges_path));
    }
    if (k == TokenizerKind::Segmented) {
      if (lexicon_path.empty()) throw std::invalid_argument("--tokenizer segmented requires --lexicon");
      lexicon = std::make_shared<SegmenterLexicon>(SegmenterLexicon::load(lexicon_path));
    }
    return k;
  }
  TokenizerResources resources() const { return {merges.get(), lexicon.get()}; }
};

int cmd_clean(const std::string& input, const std::string& output, const std::string& emoticons,
              bool no_separate) {
  auto cfg = make_norm(emoticons, !no_separate);
  std::ofstream file;
  std::ostream& out = open_output(file, output);
  for (const auto& line : read_input_lines(input)) {
    out << textnorm::clean(line, cfg) << '\n';
  }
  return 0;
}

int cmd_learn_bpe(const std::string& input, const std::string& output, int n_merges) {
  std::vector<std::vector<std::string>> corpus;
  for (const auto& line : read_input_lines(input)) corpus.push_back(tokenize_space(line));
  BpeMergeTable table = learn_bpe(corpus, n_merges);
  table.save(output);
  std::cerr << "learned " << table.size() << " merges -> " << output << "\n";
  return 0;
}

int cmd_tokenize(const std::string& input, const std::string& output, TokenizerFlags& tf) {
  const TokenizerKind kind = tf.load();
  std::ofstream file;
  std::ostream& out = open_output(file, output);
  for (const auto& line : read_input_lines(input)) {
    const auto toks = tokenize(line, kind, tf.resources());
    for (size_t i = 0; i < toks.size(); ++i) out << (i ? " " : "") << toks[i];
    out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hate-speech classification pipeline"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker threads for the compute kernels")
      ->capture_default_str();

  // ------------------------------------------------------------- clean ---
  std::string in_path, out_path, emoticons_path;
  bool no_separate = false;
  auto* c_clean = app.add_subcommand("clean", "normalize raw comment lines");
  c_clean->add_option("input", in_path, "input file ('-' = stdin)");
  c_clean->add_option("-o,--out", out_path, "output file (default stdout)");
  c_clean->add_option("--emoticons", emoticons_path, "emoticon dictionary file");
  c_clean->add_flag("--no-separate-punct", no_separate, "keep punctuation attached to words");

  // --------------------------------------------------------- learn-bpe ---
  std::string bpe_in, bpe_out = "merges.txt";
  int bpe_merges = 200;
  auto* c_bpe = app.add_subcommand("learn-bpe", "learn BPE merges from cleaned text");
  c_bpe->add_option("input", bpe_in, "cleaned text file ('-' = stdin)");
  c_bpe->add_option("-o,--out", bpe_out, "merge table output")->capture_default_str();
  c_bpe->add_option("--merges", bpe_merges, "number of merges")->capture_default_str();

  // ---------------------------------------------------------- tokenize ---
  std::string tok_in, tok_out;
  TokenizerFlags tok_flags;
  auto* c_tok = app.add_subcommand("tokenize", "tokenize cleaned text lines");
  c_tok->add_option("input", tok_in, "input file ('-' = stdin)");
  c_tok->add_option("-o,--out", tok_out, "output file (default stdout)");
  tok_flags.attach(c_tok);

  // ----------------------------------------------------- train-embedding ---
  std::string emb_kind = "cbow", emb_in, emb_out = "embedding.vec";
  TokenizerFlags emb_tok;
  int emb_dim = 200, emb_window = 5, emb_neg = 5, emb_epochs = 5, emb_min_count = 1;
  int mlm_layers = 2, mlm_heads = 4, mlm_ff = 512, mlm_batch = 16, mlm_max_len = 64;
  double mlm_lr = 5e-4;
  uint64_t emb_seed = 1;
  auto* c_emb = app.add_subcommand("train-embedding", "train CBOW vectors or the MLM encoder");
  c_emb->add_option("--kind", emb_kind, "cbow|mlm")->capture_default_str();
  c_emb->add_option("input", emb_in, "cleaned text corpus ('-' = stdin)");
  c_emb->add_option("-o,--out", emb_out, "output file (.vec or encoder .json)")->capture_default_str();
  emb_tok.attach(c_emb);
  c_emb->add_option("--dim", emb_dim)->capture_default_str();
  c_emb->add_option("--window", emb_window)->capture_default_str();
  c_emb->add_option("--negatives", emb_neg)->capture_default_str();
  c_emb->add_option("--epochs", emb_epochs)->capture_default_str();
  c_emb->add_option("--min-count", emb_min_count)->capture_default_str();
  c_emb->add_option("--seed", emb_seed)->capture_default_str();
  c_emb->add_option("--layers", mlm_layers, "mlm only")->capture_default_str();
  c_emb->add_option("--heads", mlm_heads, "mlm only")->capture_default_str();
  c_emb->add_option("--ff-dim", mlm_ff, "mlm only")->capture_default_str();
  c_emb->add_option("--batch-size", mlm_batch, "mlm only")->capture_default_str();
  c_emb->add_option("--max-len", mlm_max_len, "mlm only")->capture_default_str();
  c_emb->add_option("--lr", mlm_lr, "mlm only")->capture_default_str();

  // ------------------------------------------------------------ augment ---
  std::string aug_data, aug_encoder, aug_out, aug_classes = "offensive,hate";
  std::string aug_emoticons;
  int aug_npos = 1, aug_nout = 4, aug_min_per_class = 3;
  uint64_t aug_seed = 1;
  auto* c_aug = app.add_subcommand("augment", "masked-word data augmentation");
  c_aug->add_option("--data", aug_data, "dataset tsv")->required();
  c_aug->add_option("--encoder", aug_encoder, "trained MLM encoder json")->required();
  c_aug->add_option("-o,--out", aug_out, "output tsv (default stdout)");
  c_aug->add_option("--n-positions", aug_npos)->capture_default_str();
  c_aug->add_option("--n-outputs", aug_nout)->capture_default_str();
  c_aug->add_option("--classes", aug_classes, "labels to augment")->capture_default_str();
  c_aug->add_option("--min-per-class", aug_min_per_class)->capture_default_str();
  c_aug->add_option("--seed", aug_seed)->capture_default_str();
  c_aug->add_option("--emoticons", aug_emoticons);

  // -------------------------------------------------------------- split ---
  std::string split_data, split_train = "train.tsv", split_dev = "dev.tsv";
  double split_frac = 0.9;
  uint64_t split_seed = 13;
  auto* c_split = app.add_subcommand("split", "stratified train/dev split");
  c_split->add_option("--data", split_data, "dataset tsv")->required();
  c_split->add_option("--train-frac", split_frac)->capture_default_str();
  c_split->add_option("--seed", split_seed)->capture_default_str();
  c_split->add_option("--out-train", split_train)->capture_default_str();
  c_split->add_option("--out-dev", split_dev)->capture_default_str();

  // -------------------------------------------------------- train-model ---
  std::string tm_train, tm_dev, tm_arch = "textcnn", tm_emb_file, tm_encoder_file;
  std::string tm_out = "model.json", tm_report, tm_weights = "0.09,0.95,0.96";
  TokenizerFlags tm_tok;
  int tm_max_len = 64, tm_hidden = 128, tm_filters = 64, tm_dense = 128, tm_epochs = 30,
      tm_patience = 5, tm_batch = 32;
  double tm_lr = 1e-3, tm_dropout = 0.3;
  uint64_t tm_seed = 1;
  auto* c_tm = app.add_subcommand("train-model", "train one classifier cell");
  c_tm->add_option("--train", tm_train, "train tsv (cleaned)")->required();
  c_tm->add_option("--dev", tm_dev, "dev tsv (cleaned)")->required();
  c_tm->add_option("--arch", tm_arch, "textcnn|vdcnn|bilstm|lstmcnn|sarnn")->capture_default_str();
  c_tm->add_option("--embedding", tm_emb_file, "word2vec .vec file (sequence input)");
  c_tm->add_option("--encoder", tm_encoder_file, "MLM encoder .json (sentence input)");
  tm_tok.attach(c_tm);
  c_tm->add_option("--weights", tm_weights, "clean,offensive,hate loss weights")->capture_default_str();
  c_tm->add_option("--max-len", tm_max_len)->capture_default_str();
  c_tm->add_option("--hidden", tm_hidden)->capture_default_str();
  c_tm->add_option("--filters", tm_filters)->capture_default_str();
  c_tm->add_option("--dense-hidden", tm_dense)->capture_default_str();
  c_tm->add_option("--max-epochs", tm_epochs)->capture_default_str();
  c_tm->add_option("--patience", tm_patience)->capture_default_str();
  c_tm->add_option("--batch-size", tm_batch)->capture_default_str();
  c_tm->add_option("--lr", tm_lr)->capture_default_str();
  c_tm->add_option("--dropout", tm_dropout)->capture_default_str();
  c_tm->add_option("--seed", tm_seed)->capture_default_str();
  c_tm->add_option("-o,--out", tm_out, "model snapshot output")->capture_default_str();
  c_tm->add_option("--report", tm_report, "cell report output (for ensemble-train)");

  // ------------------------------------------------------ ensemble-train ---
  std::vector<std::string> et_reports;
  std::string et_outdir = "ensemble_out", et_weights = "0.09,0.95,0.96";
  double et_threshold = 0.67;
  uint64_t et_seed = 1;
  auto* c_et = app.add_subcommand("ensemble-train", "gate sub-models and train the stacker");
  c_et->add_option("--reports", et_reports, "cell report json files")->required()->delimiter(',');
  c_et->add_option("--threshold", et_threshold, "dev macro-F1 gate")->capture_default_str();
  c_et->add_option("--weights", et_weights)->capture_default_str();
  c_et->add_option("--seed", et_seed)->capture_default_str();
  c_et->add_option("--out-dir", et_outdir)->capture_default_str();

  // ------------------------------------------------------------ predict ---
  std::string pr_manifest, pr_in, pr_out;
  auto* c_pr = app.add_subcommand("predict", "classify comments with a trained ensemble");
  c_pr->add_option("--manifest", pr_manifest, "ensemble manifest json")->required();
  c_pr->add_option("input", pr_in, "one comment per line ('-' = stdin)");
  c_pr->add_option("-o,--out", pr_out, "output file (default stdout)");

  // ----------------------------------------------------------- evaluate ---
  std::string ev_gold, ev_pred;
  auto* c_ev = app.add_subcommand("evaluate", "macro-F1 and confusion matrix");
  c_ev->add_option("--gold", ev_gold, "gold dataset tsv")->required();
  c_ev->add_option("--pred", ev_pred, "predicted labels (first tab field per line)")->required();

  // ------------------------------------------------------- analyze-token ---
  std::string at_data, at_pred, at_token, at_from = "offensive", at_to = "clean", at_emoticons;
  auto* c_at = app.add_subcommand("analyze-token", "share of misclassified samples containing a token");
  c_at->add_option("--data", at_data, "gold dataset tsv")->required();
  c_at->add_option("--pred", at_pred, "predicted labels file")->required();
  c_at->add_option("--token", at_token)->required();
  c_at->add_option("--from", at_from, "gold class")->capture_default_str();
  c_at->add_option("--to", at_to, "predicted class")->capture_default_str();
  c_at->add_option("--emoticons", at_emoticons);

  // ---------------------------------------------------------------- run ---
  std::string run_config, run_out;
  auto* c_run = app.add_subcommand("run", "full experiment from a config file");
  c_run->add_option("--config", run_config, "experiment config file")->required();
  c_run->add_option("--out", run_out, "override output directory");

  CLI11_PARSE(app, argc, argv);
  kernels::set_threads(threads);

  try {
    if (*c_clean) return cmd_clean(in_path, out_path, emoticons_path, no_separate);
    if (*c_bpe) return cmd_learn_bpe(bpe_in, bpe_out, bpe_merges);
    if (*c_tok) return cmd_tokenize(tok_in, tok_out, tok_flags);

    if (*c_emb) {
      const TokenizerKind kind = emb_tok.load();
      std::vector<std::vector<std::string>> corpus;
      for (const auto& line : read_input_lines(emb_in)) {
        corpus.push_back(tokenize(line, kind, emb_tok.resources()));
      }
      if (emb_kind == "cbow") {
        CbowParams p;
        p.dim = emb_dim;
        p.window = emb_window;
        p.negatives = emb_neg;
        p.epochs = emb_epochs;
        p.min_count = emb_min_count;
        p.seed = emb_seed;
        CbowResult res = train_cbow(corpus, p);
        save_word2vec(res.matrix, emb_out);
        std::cerr << "cbow: vocab " << res.matrix.vocab.size() << ", dim " << res.matrix.dim;
        if (!res.epoch_loss.empty()) {
          std::cerr << ", loss " << res.epoch_loss.front() << " -> " << res.epoch_loss.back();
        }
        std::cerr << " -> " << emb_out << "\n";
      } else if (emb_kind == "mlm") {
        MlmConfig mc;
        mc.dim = emb_dim == 200 ? 256 : emb_dim;  // mlm default is 256
        mc.layers = mlm_layers;
        mc.heads = mlm_heads;
        mc.ff_dim = mlm_ff;
        mc.max_len = mlm_max_len;
        mc.lr = mlm_lr;
        mc.batch_size = mlm_batch;
        mc.epochs = emb_epochs;
        mc.seed = emb_seed;
        SentenceEncoder enc(Vocabulary::build(corpus, emb_min_count), mc);
        auto stats = enc.train(corpus);
        write_json_file(emb_out, enc.to_json());
        std::cerr << "mlm: holdout loss " << stats.initial_holdout_loss << " -> "
                  << stats.final_holdout_loss << " -> " << emb_out << "\n";
      } else {
        throw std::invalid_argument("--kind must be cbow or mlm");
      }
      return 0;
    }

    if (*c_aug) {
      auto norm = make_norm(aug_emoticons, true);
      const Dataset data = load_dataset(aug_data);
      SentenceEncoder enc = SentenceEncoder::from_json(read_json_file(aug_encoder));
      std::vector<TokenizedSample> tokenized;
      tokenized.reserve(data.size());
      for (const auto& row : data) {
        tokenized.emplace_back(tokenize_space(textnorm::clean(row.text, norm)), row.label);
      }
      CommonWordSet common = select_common_words(tokenized, aug_min_per_class);
      std::set<ClassLabel> classes;
      {
        std::stringstream ss(aug_classes);
        std::string part;
        while (std::getline(ss, part, ',')) {
          if (!part.empty()) classes.insert(parse_class(part));
        }
      }
      std::ofstream file;
      std::ostream& out = open_output(file, aug_out);
      for (size_t i = 0; i < data.size(); ++i) {
        if (!classes.count(data[i].label)) continue;
        const auto& tokens = tokenized[i].first;
        if (tokens.empty() || static_cast<int>(tokens.size()) < aug_npos) continue;
        const uint64_t sample_seed = Rng::splitmix(aug_seed ^ Rng::splitmix(i));
        auto outputs = augment_sentence(tokens, data[i].label, enc, common, aug_npos, aug_nout,
                                        sample_seed);
        for (size_t k = 0; k < outputs.size(); ++k) {
          std::string text;
          for (size_t t = 0; t < outputs[k].tokens.size(); ++t) {
            text += (t ? " " : "") + outputs[k].tokens[t];
          }
          out << data[i].id << "#aug" << k << '\t' << class_name(outputs[k].label) << '\t'
              << escape_text(text) << '\n';
        }
      }
      return 0;
    }

    if (*c_split) {
      const Dataset data = load_dataset(split_data);
      auto [train, dev] = stratified_split(data, split_frac, split_seed);
      save_dataset(train, split_train);
      save_dataset(dev, split_dev);
      std::cerr << "split: " << train.size() << " train, " << dev.size() << " dev\n";
      return 0;
    }

    if (*c_tm) {
      const Dataset train_set = load_dataset(tm_train);
      const Dataset dev_set = load_dataset(tm_dev);
      const TokenizerKind kind = tm_tok.load();
      const ClassWeights w = parse_weights(tm_weights);

      ModelConfig mc;
      mc.arch = parse_arch(tm_arch);
      mc.max_len = tm_max_len;
      mc.hidden = tm_hidden;
      mc.filters = tm_filters;
      mc.dense_hidden = tm_dense;
      mc.max_epochs = tm_epochs;
      mc.patience = tm_patience;
      mc.batch_size = tm_batch;
      mc.lr = tm_lr;
      mc.dropout = tm_dropout;
      mc.seed = tm_seed;

      std::shared_ptr<EmbeddingMatrix> matrix;
      std::shared_ptr<SentenceEncoder> encoder;
      if (!tm_encoder_file.empty()) {
        encoder = std::make_shared<SentenceEncoder>(SentenceEncoder::from_json(read_json_file(tm_encoder_file)));
        mc.sentence_input = true;
        mc.emb_dim = encoder->config().dim;
        mc.embedding_id = fs::path(tm_encoder_file).stem().string();
      } else if (!tm_emb_file.empty()) {
        matrix = std::make_shared<EmbeddingMatrix>(load_word2vec(tm_emb_file));
        mc.emb_dim = matrix->dim;
        mc.embedding_id = fs::path(tm_emb_file).stem().string();
      } else {
        throw std::invalid_argument("train-model needs --embedding or --encoder");
      }

      auto embed_split = [&](const Dataset& rows) {
        if (mc.sentence_input) {
          std::vector<std::vector<double>> vecs;
          for (const auto& r : rows) {
            vecs.push_back(encoder->encode(tokenize(r.text, kind, tm_tok.resources())));
          }
          return EmbeddedData(std::move(vecs));
        }
        std::vector<std::vector<int>> ids;
        for (const auto& r : rows) {
          std::vector<int> seq;
          for (const auto& tok : tokenize(r.text, kind, tm_tok.resources())) {
            seq.push_back(matrix->vocab.index(tok));
          }
          ids.push_back(std::move(seq));
        }
        return EmbeddedData(std::move(ids), &matrix->vectors, matrix->vocab.size(), matrix->dim,
                            mc.max_len);
      };
      std::vector<ClassLabel> train_labels, dev_labels;
      for (const auto& r : train_set) train_labels.push_back(r.label);
      for (const auto& r : dev_set) dev_labels.push_back(r.label);

      auto model = make_classifier(mc);
      TrainResult tr = train_model(*model, mc, embed_split(train_set), train_labels,
                                   embed_split(dev_set), dev_labels, w);
      std::vector<ClassLabel> preds(tr.dev_probs.rows);
      for (int i = 0; i < tr.dev_probs.rows; ++i) {
        preds[i] = severity_argmax({tr.dev_probs.at(i, 0), tr.dev_probs.at(i, 1), tr.dev_probs.at(i, 2)});
      }
      const double dev_f1 = f1_macro(preds, dev_labels);
      write_json_file(tm_out, model_snapshot(*model, mc, tr.best_dev_loss));
      std::cout << "dev_f1 " << dev_f1 << " best_dev_loss " << tr.best_dev_loss << " epochs "
                << tr.epochs_run << "\n";

      if (!tm_report.empty()) {
        nlohmann::json probs_j = nlohmann::json::array();
        std::vector<std::string> sample_ids;
        for (const auto& r : dev_set) sample_ids.push_back(r.id);
        for (int i = 0; i < tr.dev_probs.rows; ++i) {
          probs_j.push_back({tr.dev_probs.at(i, 0), tr.dev_probs.at(i, 1), tr.dev_probs.at(i, 2)});
        }
        nlohmann::json rep = {{"format", "hsd-cellreport-v1"},
                              {"id", tm_arch + ":" + mc.embedding_id},
                              {"dev_f1", dev_f1},
                              {"sample_ids", sample_ids},
                              {"labels", [&] {
                                 std::vector<std::string> ls;
                                 for (auto l : dev_labels) ls.push_back(class_name(l));
                                 return ls;
                               }()},
                              {"probs", probs_j},
                              {"snapshot", tm_out},
                              {"tokenizer", tokenizer_name(kind)},
                              {"embedding", tm_emb_file.empty() ? nlohmann::json(nullptr)
                                                                : nlohmann::json(tm_emb_file)},
                              {"encoder", tm_encoder_file.empty() ? nlohmann::json(nullptr)
                                                                  : nlohmann::json(tm_encoder_file)},
                              {"merges", tm_tok.merges_path.empty() ? nlohmann::json(nullptr)
                                                                    : nlohmann::json(tm_tok.merges_path)},
                              {"lexicon", tm_tok.lexicon_path.empty() ? nlohmann::json(nullptr)
                                                                      : nlohmann::json(tm_tok.lexicon_path)}};
        write_json_file(tm_report, rep);
      }
      return 0;
    }

    if (*c_et) {
      const ClassWeights w = parse_weights(et_weights);
      fs::create_directories(et_outdir);
      std::vector<SubmodelReport> reports;
      std::vector<nlohmann::json> raw;
      std::vector<ClassLabel> labels;
      for (const auto& path : et_reports) {
        nlohmann::json j = read_json_file(path);
        if (j.value("format", "") != "hsd-cellreport-v1") {
          throw std::invalid_argument(path + ": not a cell report");
        }
        SubmodelReport r;
        r.id = j.at("id").get<std::string>();
        r.dev_f1 = j.at("dev_f1").get<double>();
        r.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
        const auto& pj = j.at("probs");
        r.probs = nn::Mat(static_cast<int>(pj.size()), kNumClasses);
        for (size_t i = 0; i < pj.size(); ++i) {
          for (int c = 0; c < kNumClasses; ++c) r.probs.at(static_cast<int>(i), c) = pj[i][c].get<double>();
        }
        r.snapshot_path = j.at("snapshot").get<std::string>();
        if (labels.empty()) {
          for (const auto& l : j.at("labels")) labels.push_back(parse_class(l.get<std::string>()));
        }
        reports.push_back(std::move(r));
        raw.push_back(std::move(j));
      }
      const auto selected = select_models(reports, et_threshold);
      EnsembleFeatures features = build_features(selected, reports);
      StackerResult sr = train_stacker(features.x, labels, w, et_seed);
      write_json_file((fs::path(et_outdir) / "stacker.model.json").string(),
                      model_snapshot(*sr.model, sr.config, 0.0));

      auto rel_to_outdir = [&](const std::string& p) -> nlohmann::json {
        if (p.empty()) return nullptr;
        return fs::relative(fs::absolute(p), fs::absolute(et_outdir)).generic_string();
      };
      nlohmann::json submodels = nlohmann::json::array();
      for (const auto& id : selected) {
        for (const auto& j : raw) {
          if (j.at("id") != id) continue;
          nlohmann::json sj = {{"id", id},
                               {"snapshot", rel_to_outdir(j.at("snapshot").get<std::string>())},
                               {"tokenizer", j.at("tokenizer")},
                               {"embedding", j.at("embedding").is_null()
                                                 ? nlohmann::json(nullptr)
                                                 : rel_to_outdir(j.at("embedding").get<std::string>())},
                               {"encoder", j.at("encoder").is_null()
                                               ? nlohmann::json(nullptr)
                                               : rel_to_outdir(j.at("encoder").get<std::string>())},
                               {"merges", j.at("merges").is_null()
                                              ? nlohmann::json(nullptr)
                                              : rel_to_outdir(j.at("merges").get<std::string>())},
                               {"lexicon", j.at("lexicon").is_null()
                                               ? nlohmann::json(nullptr)
                                               : rel_to_outdir(j.at("lexicon").get<std::string>())}};
          submodels.push_back(sj);
        }
      }
      nlohmann::json manifest = {{"format", "hsd-ensemble-v1"},
                                 {"threshold", et_threshold},
                                 {"normalization", {{"emoticons", nullptr}, {"separate_punct", true}}},
                                 {"submodels", submodels},
                                 {"stacker", "stacker.model.json"}};
      write_json_file((fs::path(et_outdir) / "ensemble.json").string(), manifest);
      std::cout << "selected " << selected.size() << " models, stacker fit_f1 " << sr.fit_f1
                << "\n";
      return 0;
    }

    if (*c_pr) {
      EnsembleRuntime rt = EnsembleRuntime::load(pr_manifest);
      std::ofstream file;
      std::ostream& out = open_output(file, pr_out);
      char buf[128];
      for (const auto& line : read_input_lines(pr_in)) {
        auto [probs, label] = rt.predict(line);
        std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\t%.6f", class_name(label), probs[0],
                      probs[1], probs[2]);
        out << buf << '\n';
      }
      return 0;
    }

    if (*c_ev) {
      const Dataset gold = load_dataset(ev_gold);
      const std::vector<ClassLabel> preds = read_pred_labels(ev_pred);
      if (preds.size() != gold.size()) {
        throw std::invalid_argument("prediction count does not match gold dataset");
      }
      std::vector<ClassLabel> golds;
      for (const auto& r : gold) golds.push_back(r.label);
      const ConfusionMatrix cm = confusion(preds, golds);
      std::printf("macro_f1 %.6f\n", f1_macro(preds, golds));
      for (int c = 0; c < kNumClasses; ++c) {
        long tp = cm.m[c][c], fp = 0, fn = 0;
        for (int o = 0; o < kNumClasses; ++o) {
          if (o != c) {
            fp += cm.m[o][c];
            fn += cm.m[c][o];
          }
        }
        const double p = (tp + fp) ? double(tp) / (tp + fp) : 0.0;
        const double r = (tp + fn) ? double(tp) / (tp + fn) : 0.0;
        const double f = (p + r > 0) ? 2 * p * r / (p + r) : 0.0;
        std::printf("%-9s P %.4f R %.4f F1 %.4f\n", class_name(static_cast<ClassLabel>(c)), p, r, f);
      }
      std::printf("confusion (rows gold, cols pred):\n");
      for (int g = 0; g < kNumClasses; ++g) {
        std::printf("%-9s", class_name(static_cast<ClassLabel>(g)));
        for (int p = 0; p < kNumClasses; ++p) std::printf(" %6ld", cm.m[g][p]);
        std::printf("\n");
      }
      return 0;
    }

    if (*c_at) {
      const Dataset data = load_dataset(at_data);
      const std::vector<ClassLabel> preds = read_pred_labels(at_pred);
      if (preds.size() != data.size()) {
        throw std::invalid_argument("prediction count does not match dataset");
      }
      auto norm = make_norm(at_emoticons, true);
      const double share = token_error_share(data, preds, parse_class(at_from), parse_class(at_to),
                                             at_token, norm);
      std::printf("%.4f\n", share);
      return 0;
    }

    if (*c_run) {
      ExperimentConfig cfg = ExperimentConfig::load(run_config);
      if (!run_out.empty()) cfg.out_dir = run_out;
      ExperimentReport rep = run_experiment(cfg);
      std::printf("%-24s %-12s %8s %12s\n", "cell", "embedding", "dev_f1", "best_loss");
      for (const auto& c : rep.cells) {
        std::printf("%-24s %-12s %8.4f %12.6f\n", c.id.c_str(), c.embedding.c_str(), c.dev_f1,
                    c.best_dev_loss);
      }
      std::printf("selected:");
      for (const auto& id : rep.selected) std::printf(" %s", id.c_str());
      std::printf("\nensemble_dev_f1 %.4f\n", rep.ensemble_dev_f1);
      std::printf("report %s\n", rep.report_path.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
