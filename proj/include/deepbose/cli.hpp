// Command-line front end: one JSON config (with dotted-path overrides)
// drives seven subcommands covering codebook preparation, the offline
// baseline, supervised training, evaluation, interpretability exports, and
// synthetic fixture generation.
#pragma once

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deepbose/baseline.hpp"
#include "deepbose/clustering.hpp"
#include "deepbose/core.hpp"
#include "deepbose/gradient.hpp"
#include "deepbose/interpret.hpp"
#include "deepbose/model.hpp"
#include "deepbose/serialize.hpp"
#include "deepbose/text_io.hpp"
#include "deepbose/train.hpp"

namespace deepbose {

inline nlohmann::json default_config() {
  nlohmann::json j;
  j["paths"]["embeddings"] = "";
  j["paths"]["lexicon"] = "";
  j["paths"]["train"] = "";
  j["paths"]["val"] = nullptr;
  j["paths"]["test"] = "";
  j["paths"]["codebook"] = nullptr;   // default: <output_dir>/codebook.json
  j["paths"]["model"] = nullptr;      // default: <output_dir>/model.json
  j["paths"]["output_dir"] = "out";
  j["codebook"]["alpha"] = 100.0;
  j["codebook"]["ap"]["damping"] = 0.9;
  j["codebook"]["ap"]["preference"] = nullptr;  // median off-diagonal similarity
  j["codebook"]["ap"]["max_iter"] = 200;
  j["codebook"]["ap"]["convergence_window"] = 15;
  j["codebook"]["dmae"]["lr"] = 1e-5;
  j["codebook"]["dmae"]["epochs"] = 100;
  j["model"]["pooling"] = "sum_tfidf";
  j["model"]["dense_widths"] = {64, 64};
  j["model"]["dropout"] = 0.2;
  j["training"]["mode"] = "stl";
  j["training"]["lr"] = nullptr;      // default by mode: utl 1e-5, stl 1e-6
  j["training"]["alpha"] = nullptr;   // optional override of the codebook alpha
  j["training"]["epochs"] = 100;
  j["training"]["batch_size"] = 16;
  j["training"]["seed"] = 42;
  j["training"]["class_weighted"] = true;
  j["training"]["threshold"] = 0.5;
  j["training"]["patience"] = 10;
  j["training"]["val_fraction"] = 0.2;
  j["baseline"]["l2"] = 1e-4;
  j["baseline"]["lr"] = 0.1;
  j["baseline"]["epochs"] = 200;
  j["baseline"]["seed"] = 42;
  j["synth"]["n_train"] = 400;
  j["synth"]["n_test"] = 100;
  j["synth"]["doc_len"] = 80;
  j["synth"]["n_emotions"] = 6;
  j["synth"]["words_per_emotion"] = 40;
  j["synth"]["dim"] = 16;
  j["synth"]["class_skew"] = 0.8;
  j["synth"]["seed"] = 7;
  j["max_doc_tokens"] = 20000;
  j["threads"] = 1;
  return j;
}

namespace detail {

inline void merge_config(nlohmann::json& base, const nlohmann::json& user,
                         const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    if (!base.contains(key)) throw ConfigError("unknown config key: " + prefix + key);
    if (base[key].is_object() && !value.is_null())
      merge_config(base[key], value, prefix + key + ".");
    else
      base[key] = value;
  }
}

inline void apply_override(nlohmann::json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects dotted.path=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json* node = &cfg;
  std::size_t start = 0;
  for (;;) {
    const auto dotpos = path.find('.', start);
    const std::string key = path.substr(start, dotpos - start);
    if (!node->is_object() || !node->contains(key))
      throw ConfigError("unknown config key in --set: " + path);
    node = &(*node)[key];
    if (dotpos == std::string::npos) break;
    start = dotpos + 1;
  }
  const nlohmann::json parsed = nlohmann::json::parse(raw, nullptr, false);
  *node = parsed.is_discarded() ? nlohmann::json(raw) : parsed;
}

inline double req_double(const nlohmann::json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(what + " must be finite");
  return v;
}

inline long long req_int(const nlohmann::json& j, const std::string& what) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    throw ConfigError(what + " must be an integer");
  return j.get<long long>();
}

inline bool req_bool(const nlohmann::json& j, const std::string& what) {
  if (!j.is_boolean()) throw ConfigError(what + " must be a boolean");
  return j.get<bool>();
}

inline std::string req_string(const nlohmann::json& j, const std::string& what) {
  if (!j.is_string()) throw ConfigError(what + " must be a string");
  return j.get<std::string>();
}

}  // namespace detail

struct RunConfig {
  // paths
  std::string embeddings, lexicon, train, test, output_dir;
  std::optional<std::string> val;
  std::string codebook_path, model_path;  // defaulted into output_dir
  // codebook stage
  double alpha = 100.0;
  ApConfig ap;
  DmaeConfig dmae;
  // model shape
  Pooling pooling = Pooling::SumTfidf;
  std::vector<int> dense_widths{64, 64};
  double dropout = 0.2;
  // supervised training
  std::string mode = "stl";
  double lr = 1e-6;  // resolved from mode when the config leaves it null
  std::optional<double> train_alpha;
  int epochs = 100, batch_size = 16, patience = 10;
  std::uint64_t seed = 42;
  bool class_weighted = true;
  double threshold = 0.5, val_fraction = 0.2;
  // offline baseline
  double baseline_l2 = 1e-4, baseline_lr = 0.1;
  int baseline_epochs = 200;
  std::uint64_t baseline_seed = 42;
  // synthetic fixtures
  SyntheticSpec synth;
  int synth_n_train = 400, synth_n_test = 100;
  // shared
  std::size_t max_doc_tokens = 20000;
  int threads = 1;

  nlohmann::json canonical;  // fully-defaulted effective config
  std::string config_hash;   // fingerprint of canonical minus "threads"
};

inline RunConfig parse_config(const nlohmann::json& user,
                              const std::vector<std::string>& overrides) {
  nlohmann::json j = default_config();
  detail::merge_config(j, user, "");
  for (const auto& o : overrides) detail::apply_override(j, o);

  RunConfig c;
  c.canonical = j;
  {
    nlohmann::json hashed = j;
    hashed.erase("threads");
    c.config_hash = to_hex(fnv1a(hashed.dump()));
  }

  const auto& paths = j["paths"];
  c.embeddings = detail::req_string(paths["embeddings"], "paths.embeddings");
  c.lexicon = detail::req_string(paths["lexicon"], "paths.lexicon");
  c.train = detail::req_string(paths["train"], "paths.train");
  c.test = detail::req_string(paths["test"], "paths.test");
  c.output_dir = detail::req_string(paths["output_dir"], "paths.output_dir");
  if (c.output_dir.empty()) throw ConfigError("paths.output_dir must be non-empty");
  if (!paths["val"].is_null()) c.val = detail::req_string(paths["val"], "paths.val");
  c.codebook_path = paths["codebook"].is_null()
                        ? (std::filesystem::path(c.output_dir) / "codebook.json").string()
                        : detail::req_string(paths["codebook"], "paths.codebook");
  c.model_path = paths["model"].is_null()
                     ? (std::filesystem::path(c.output_dir) / "model.json").string()
                     : detail::req_string(paths["model"], "paths.model");

  c.alpha = detail::req_double(j["codebook"]["alpha"], "codebook.alpha");
  if (c.alpha <= 0.0) throw ConfigError("codebook.alpha must be positive");
  c.ap.damping = detail::req_double(j["codebook"]["ap"]["damping"], "codebook.ap.damping");
  if (!j["codebook"]["ap"]["preference"].is_null())
    c.ap.preference =
        detail::req_double(j["codebook"]["ap"]["preference"], "codebook.ap.preference");
  c.ap.max_iter =
      static_cast<int>(detail::req_int(j["codebook"]["ap"]["max_iter"], "codebook.ap.max_iter"));
  c.ap.convergence_window = static_cast<int>(detail::req_int(
      j["codebook"]["ap"]["convergence_window"], "codebook.ap.convergence_window"));
  if (c.ap.damping < 0.5 || c.ap.damping >= 1.0)
    throw ConfigError("codebook.ap.damping must lie in [0.5, 1)");
  if (c.ap.max_iter < 1 || c.ap.convergence_window < 1)
    throw ConfigError("codebook.ap iteration settings must be positive");
  c.dmae.alpha = c.alpha;
  c.dmae.lr = detail::req_double(j["codebook"]["dmae"]["lr"], "codebook.dmae.lr");
  c.dmae.epochs =
      static_cast<int>(detail::req_int(j["codebook"]["dmae"]["epochs"], "codebook.dmae.epochs"));
  if (c.dmae.lr <= 0.0) throw ConfigError("codebook.dmae.lr must be positive");
  if (c.dmae.epochs < 0) throw ConfigError("codebook.dmae.epochs must be non-negative");

  c.pooling = pooling_from_name(detail::req_string(j["model"]["pooling"], "model.pooling"));
  if (!j["model"]["dense_widths"].is_array() || j["model"]["dense_widths"].empty())
    throw ConfigError("model.dense_widths must be a non-empty array");
  c.dense_widths.clear();
  for (const auto& w : j["model"]["dense_widths"]) {
    const auto width = detail::req_int(w, "model.dense_widths entry");
    if (width < 1) throw ConfigError("model.dense_widths entries must be positive");
    c.dense_widths.push_back(static_cast<int>(width));
  }
  c.dropout = detail::req_double(j["model"]["dropout"], "model.dropout");
  if (c.dropout < 0.0 || c.dropout >= 1.0) throw ConfigError("model.dropout must lie in [0, 1)");

  c.mode = detail::req_string(j["training"]["mode"], "training.mode");
  if (c.mode != "utl" && c.mode != "stl")
    throw ConfigError("training.mode must be 'utl' or 'stl'");
  c.lr = j["training"]["lr"].is_null() ? (c.mode == "utl" ? 1e-5 : 1e-6)
                                       : detail::req_double(j["training"]["lr"], "training.lr");
  if (c.lr <= 0.0) throw ConfigError("training.lr must be positive");
  if (!j["training"]["alpha"].is_null()) {
    c.train_alpha = detail::req_double(j["training"]["alpha"], "training.alpha");
    if (*c.train_alpha <= 0.0) throw ConfigError("training.alpha must be positive");
  }
  c.epochs = static_cast<int>(detail::req_int(j["training"]["epochs"], "training.epochs"));
  c.batch_size =
      static_cast<int>(detail::req_int(j["training"]["batch_size"], "training.batch_size"));
  c.seed = static_cast<std::uint64_t>(detail::req_int(j["training"]["seed"], "training.seed"));
  c.class_weighted = detail::req_bool(j["training"]["class_weighted"], "training.class_weighted");
  c.threshold = detail::req_double(j["training"]["threshold"], "training.threshold");
  c.patience = static_cast<int>(detail::req_int(j["training"]["patience"], "training.patience"));
  c.val_fraction =
      detail::req_double(j["training"]["val_fraction"], "training.val_fraction");
  if (c.epochs < 0) throw ConfigError("training.epochs must be non-negative");
  if (c.batch_size < 1) throw ConfigError("training.batch_size must be at least 1");
  if (c.threshold < 0.0 || c.threshold > 1.0)
    throw ConfigError("training.threshold must lie in [0, 1]");
  if (!(c.val_fraction > 0.0) || c.val_fraction >= 1.0)
    throw ConfigError("training.val_fraction must lie in (0, 1)");

  c.baseline_l2 = detail::req_double(j["baseline"]["l2"], "baseline.l2");
  c.baseline_lr = detail::req_double(j["baseline"]["lr"], "baseline.lr");
  c.baseline_epochs = static_cast<int>(detail::req_int(j["baseline"]["epochs"], "baseline.epochs"));
  c.baseline_seed =
      static_cast<std::uint64_t>(detail::req_int(j["baseline"]["seed"], "baseline.seed"));
  if (c.baseline_l2 < 0.0 || c.baseline_lr <= 0.0 || c.baseline_epochs < 0)
    throw ConfigError("baseline hyperparameters out of range");

  c.synth_n_train = static_cast<int>(detail::req_int(j["synth"]["n_train"], "synth.n_train"));
  c.synth_n_test = static_cast<int>(detail::req_int(j["synth"]["n_test"], "synth.n_test"));
  c.synth.doc_len = static_cast<int>(detail::req_int(j["synth"]["doc_len"], "synth.doc_len"));
  c.synth.n_emotions =
      static_cast<int>(detail::req_int(j["synth"]["n_emotions"], "synth.n_emotions"));
  c.synth.words_per_emotion = static_cast<int>(
      detail::req_int(j["synth"]["words_per_emotion"], "synth.words_per_emotion"));
  c.synth.dim = static_cast<int>(detail::req_int(j["synth"]["dim"], "synth.dim"));
  c.synth.class_skew = detail::req_double(j["synth"]["class_skew"], "synth.class_skew");
  c.synth.seed = static_cast<std::uint64_t>(detail::req_int(j["synth"]["seed"], "synth.seed"));
  if (c.synth_n_train < 1 || c.synth_n_test < 0)
    throw ConfigError("synth corpus sizes out of range");
  c.synth.n_docs = c.synth_n_train + c.synth_n_test;

  const auto max_tokens = detail::req_int(j["max_doc_tokens"], "max_doc_tokens");
  if (max_tokens < 1) throw ConfigError("max_doc_tokens must be at least 1");
  c.max_doc_tokens = static_cast<std::size_t>(max_tokens);
  c.threads = static_cast<int>(detail::req_int(j["threads"], "threads"));
  if (c.threads < 1) throw ConfigError("threads must be at least 1");
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  const nlohmann::json user = nlohmann::json::parse(in, nullptr, false);
  if (user.is_discarded()) throw ConfigError("malformed JSON config: " + path.string());
  return parse_config(user, overrides);
}

namespace detail {

inline void report(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

inline void wrote(const std::filesystem::path& path) {
  std::cout << "wrote " << path.string() << "\n";
}

// A configured output file outside output_dir; creates its directory.
inline std::filesystem::path at_path(const std::string& file) {
  const std::filesystem::path p(file);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  return p;
}

inline std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  return std::filesystem::path(cfg.output_dir) / name;
}

inline void check_dims(const EmbeddingTable& table, const Codebook& cb) {
  if (table.dim != cb.dim())
    throw DataError("embedding dimension " + std::to_string(table.dim) +
                    " does not match codebook dimension " + std::to_string(cb.dim()));
}

inline std::string safe_filename(const std::string& id) {
  std::string out;
  for (char ch : id)
    out.push_back(std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_');
  return out.empty() ? std::string("doc") : out;
}

}  // namespace detail

inline void cmd_prepare_codebook(const RunConfig& cfg) {
  std::vector<std::string> warnings;
  const EmbeddingTable table = load_embeddings(cfg.embeddings, &warnings);
  const Lexicon lexicon = load_lexicon(cfg.lexicon, &warnings);

  CodebookConfig cc;
  cc.ap = cfg.ap;
  cc.dmae = cfg.dmae;
  cc.dmae.alpha = cfg.alpha;
  cc.threads = cfg.threads;
  const CodebookBuildResult result = build_codebook(lexicon, table, cc, &warnings);
  detail::report(warnings);

  const auto cb_path = detail::at_path(cfg.codebook_path);
  save_codebook(cb_path, result.codebook);
  detail::wrote(cb_path);

  nlohmann::json meta;
  meta["config_hash"] = cfg.config_hash;
  meta["alpha"] = result.codebook.alpha;
  meta["K_total"] = result.codebook.total();
  meta["emotions"] = nlohmann::json::array();
  for (std::size_t e = 0; e < result.codebook.blocks.size(); ++e) {
    meta["emotions"].push_back({{"name", result.codebook.blocks[e].emotion},
                                {"K_e", result.codebook.blocks[e].size},
                                {"words_used", result.words_used[e]},
                                {"ap_iterations", result.ap[e].iterations},
                                {"ap_converged", result.ap[e].converged},
                                {"dmae_loss", result.dmae[e].loss}});
  }
  const auto meta_path = detail::out_path(cfg, "codebook.meta.json");
  detail::write_text_file(meta_path, meta.dump(2) + "\n");
  detail::wrote(meta_path);
}

namespace detail {

struct BaselineDocs {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<SparseCounts> counts;
};

inline BaselineDocs baseline_features(const Corpus& corpus, const EmbeddingTable& table,
                                      const Codebook& cb, int order, std::size_t max_tokens,
                                      std::vector<std::string>* warnings) {
  BaselineDocs out;
  for (const auto& doc : corpus.documents) {
    if (!doc.label) {
      warn(warnings, "document '" + doc.id + "' has no label; skipped by the baseline");
      continue;
    }
    EmbeddedDoc embedded;
    try {
      embedded = embed_document(doc, table, max_tokens);
    } catch (const DataError&) {
      warn(warnings, "document '" + doc.id + "' has no in-vocabulary tokens; skipped");
      continue;
    }
    const LabelSequence seq = hard_assign(embedded, cb);
    if (seq.size() < static_cast<std::size_t>(order)) {
      warn(warnings, "document '" + doc.id + "' is shorter than the n-gram order; skipped");
      continue;
    }
    out.ids.push_back(doc.id);
    out.labels.push_back(*doc.label);
    out.counts.push_back(ngram_counts(seq, order, cb.total()));
  }
  return out;
}

}  // namespace detail

inline void cmd_baseline(const RunConfig& cfg) {
  std::vector<std::string> warnings;
  const EmbeddingTable table = load_embeddings(cfg.embeddings, &warnings);
  const Codebook cb = load_codebook(cfg.codebook_path);
  detail::check_dims(table, cb);
  const Corpus train = load_corpus(cfg.train, &warnings);
  const Corpus test = load_corpus(cfg.test, &warnings);
  if (test.documents.empty()) throw DataError("test corpus is empty: " + cfg.test);

  for (const int order : {1, 2}) {
    const std::string tag = order == 1 ? "unigram" : "bigram";
    const auto train_docs =
        detail::baseline_features(train, table, cb, order, cfg.max_doc_tokens, &warnings);
    const auto test_docs =
        detail::baseline_features(test, table, cb, order, cfg.max_doc_tokens, &warnings);
    if (train_docs.ids.empty())
      throw DataError("no usable " + tag + " training documents for the baseline");
    if (test_docs.ids.empty())
      throw DataError("no usable " + tag + " test documents for the baseline");

    const std::size_t space = order == 1 ? cb.total() : cb.total() * cb.total();
    const IdfVector idf = compute_idf(train_docs.counts, space);
    std::vector<std::vector<double>> train_x, test_x;
    for (const auto& counts : train_docs.counts) train_x.push_back(tfidf_vector(counts, idf));
    for (const auto& counts : test_docs.counts) test_x.push_back(tfidf_vector(counts, idf));

    const LinearClassifier clf =
        baseline_train(train_x, train_docs.labels, cfg.baseline_l2, cfg.baseline_epochs,
                       cfg.baseline_lr, cfg.baseline_seed);
    std::vector<double> predictions;
    for (const auto& x : test_x) predictions.push_back(clf.predict(x));
    const MetricReport report = metrics(predictions, test_docs.labels, cfg.threshold);

    const auto train_f = detail::out_path(cfg, "baseline_train_" + tag + ".features");
    const auto test_f = detail::out_path(cfg, "baseline_test_" + tag + ".features");
    const auto metrics_f = detail::out_path(cfg, "baseline_" + tag + "_metrics.json");
    save_features(train_f, train_docs.ids, train_docs.labels, train_docs.counts);
    save_features(test_f, test_docs.ids, test_docs.labels, test_docs.counts);
    save_metrics(metrics_f, report);
    detail::wrote(train_f);
    detail::wrote(test_f);
    detail::wrote(metrics_f);
  }
  detail::report(warnings);
}

inline void cmd_train(const RunConfig& cfg) {
  std::vector<std::string> warnings;
  const EmbeddingTable table = load_embeddings(cfg.embeddings, &warnings);
  Codebook cb = load_codebook(cfg.codebook_path);
  detail::check_dims(table, cb);
  if (cfg.train_alpha) cb.alpha = *cfg.train_alpha;

  const Corpus full_train = load_corpus(cfg.train, &warnings);
  Corpus train, val;
  if (cfg.val) {
    train = full_train;
    val = load_corpus(*cfg.val, &warnings);
  } else {
    SplitResult split = stratified_split(full_train, cfg.val_fraction, cfg.seed, &warnings);
    train = std::move(split.train);
    val = std::move(split.val);
  }

  ModelParams params;
  params.codebook = std::move(cb);
  params.idf_weights =
      init_idf_weights(train, table, params.codebook, cfg.max_doc_tokens, &warnings);
  params.dense = dense_init(params.codebook.total(), cfg.dense_widths, cfg.seed);
  params.dropout_rate = cfg.dropout;
  params.pooling = cfg.pooling;

  TrainConfig tc;
  tc.lr = cfg.lr;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  tc.class_weighted = cfg.class_weighted;
  tc.threshold = cfg.threshold;
  tc.patience = cfg.patience;
  tc.threads = cfg.threads;
  tc.max_doc_tokens = cfg.max_doc_tokens;
  if (cfg.mode == "utl") {
    tc.freeze_codebook = true;
    tc.freeze_biases = true;
  }
  const TrainHistory history = train_supervised(train, val, table, params, tc, &warnings);
  detail::report(warnings);

  const auto model_path = detail::at_path(cfg.model_path);
  const auto history_path = detail::out_path(cfg, "history.csv");
  save_model(model_path, {params, cfg.config_hash});
  save_history(history_path, history);
  detail::wrote(model_path);
  detail::wrote(history_path);
  if (!history.epochs.empty())
    std::cout << "best epoch " << history.best_epoch << " val_f1 "
              << format_double(history.best_val_f1) << "\n";
}

namespace detail {

inline ModelBundle load_model_checked(const RunConfig& cfg, const EmbeddingTable& table) {
  ModelBundle bundle = load_model(cfg.model_path);
  check_dims(table, bundle.params.codebook);
  return bundle;
}

}  // namespace detail

inline void cmd_evaluate(const RunConfig& cfg) {
  std::vector<std::string> warnings;
  const EmbeddingTable table = load_embeddings(cfg.embeddings, &warnings);
  const ModelBundle bundle = detail::load_model_checked(cfg, table);
  const Corpus test = load_corpus(cfg.test, &warnings);
  if (test.documents.empty()) throw DataError("test corpus is empty: " + cfg.test);

  struct Scored {
    double prediction;
    int label;
    bool ok;
  };
  std::vector<Scored> scored(test.documents.size());
  parallel_for(test.documents.size(), cfg.threads, [&](std::size_t i) {
    const auto& doc = test.documents[i];
    scored[i].ok = false;
    if (!doc.label) return;
    EmbeddedDoc embedded;
    try {
      embedded = embed_document(doc, table, cfg.max_doc_tokens);
    } catch (const DataError&) {
      return;
    }
    scored[i].prediction = forward(embedded.matrix, bundle.params, RunMode::Eval).prediction;
    scored[i].label = *doc.label;
    scored[i].ok = true;
  });

  std::vector<double> predictions;
  std::vector<int> labels;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (!scored[i].ok) {
      detail::warn(&warnings, "document '" + test.documents[i].id +
                                  "' skipped in evaluation (unlabelled or no tokens)");
      continue;
    }
    predictions.push_back(scored[i].prediction);
    labels.push_back(scored[i].label);
  }
  if (predictions.empty()) throw DataError("no usable labelled documents in the test corpus");
  detail::report(warnings);

  const MetricReport report = metrics(predictions, labels, cfg.threshold);
  const auto path = detail::out_path(cfg, "metrics.json");
  save_metrics(path, report);
  detail::wrote(path);
}

inline void cmd_explain(const RunConfig& cfg, const std::string& doc_id,
                        const std::string& corpus_name) {
  std::vector<std::string> warnings;
  const EmbeddingTable table = load_embeddings(cfg.embeddings, &warnings);
  const ModelBundle bundle = detail::load_model_checked(cfg, table);

  std::string corpus_path;
  if (corpus_name == "test")
    corpus_path = cfg.test;
  else if (corpus_name == "train")
    corpus_path = cfg.train;
  else if (corpus_name == "val" && cfg.val)
    corpus_path = *cfg.val;
  else
    throw ConfigError("--corpus must name a configured corpus (train, val, test)");
  const Corpus corpus = load_corpus(corpus_path, &warnings);

  const Document* doc = nullptr;
  for (const auto& d : corpus.documents)
    if (d.id == doc_id) {
      doc = &d;
      break;
    }
  if (!doc) throw DataError("document '" + doc_id + "' not found in " + corpus_path);

  const EmbeddedDoc embedded = embed_document(*doc, table, cfg.max_doc_tokens);
  const SaliencyMap map = saliency(embedded, bundle.params, doc_id);
  detail::report(warnings);

  const auto path = detail::out_path(cfg, "saliency_" + detail::safe_filename(doc_id) + ".json");
  save_saliency(path, map);
  detail::wrote(path);
}

inline void cmd_histogram(const RunConfig& cfg) {
  std::vector<std::string> warnings;
  const EmbeddingTable table = load_embeddings(cfg.embeddings, &warnings);
  const ModelBundle bundle = detail::load_model_checked(cfg, table);
  const Corpus test = load_corpus(cfg.test, &warnings);

  for (const int label : {0, 1}) {
    const EmotionHistogram hist =
        emotion_histogram(test, table, bundle.params, label, cfg.max_doc_tokens, &warnings);
    const auto path = detail::out_path(cfg, "histogram_" + hist.population + ".csv");
    save_histogram(path, hist);
    detail::wrote(path);
  }
  detail::report(warnings);
}

inline void cmd_synth(const RunConfig& cfg) {
  const SyntheticData data = generate_synthetic_corpus(cfg.synth);

  Corpus train, test;
  for (std::size_t i = 0; i < data.corpus.documents.size(); ++i) {
    if (i < static_cast<std::size_t>(cfg.synth_n_train))
      train.documents.push_back(data.corpus.documents[i]);
    else
      test.documents.push_back(data.corpus.documents[i]);
  }

  std::vector<std::string> token_order;
  std::vector<std::pair<std::string, std::vector<std::string>>> lexicon_entries;
  for (const auto& [emotion, words] : data.word_order) {
    lexicon_entries.emplace_back(emotion, words);
    for (const auto& w : words) token_order.push_back(w);
  }

  // Honor configured input paths so later stages find these files; fall
  // back to output_dir names when the config leaves a path unset.
  const auto target = [&](const std::string& configured, const char* fallback) {
    return configured.empty() ? detail::out_path(cfg, fallback) : detail::at_path(configured);
  };
  const auto train_path = target(cfg.train, "synth_train.jsonl");
  const auto test_path = target(cfg.test, "synth_test.jsonl");
  const auto vec_path = target(cfg.embeddings, "synth_embeddings.vec");
  const auto lex_path = target(cfg.lexicon, "synth_lexicon.tsv");
  save_corpus(train_path, train);
  save_corpus(test_path, test);
  save_embeddings(vec_path, data.table, token_order);
  save_lexicon(lex_path, lexicon_entries);
  detail::wrote(train_path);
  detail::wrote(test_path);
  detail::wrote(vec_path);
  detail::wrote(lex_path);
}

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"differentiable bag-of-sub-emotions text classifier"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string doc_id;
  std::string corpus_name = "test";
  std::string model_override;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--set", overrides, "override a config key: dotted.path=value");
    return sub;
  };
  auto* prepare = add_common(app.add_subcommand(
      "prepare-codebook", "cluster the lexicon and fine-tune the codebook"));
  auto* baseline = add_common(
      app.add_subcommand("baseline", "offline hard-assignment TF-IDF baseline"));
  auto* train = add_common(app.add_subcommand("train", "supervised end-to-end training"));
  auto* evaluate = add_common(app.add_subcommand("evaluate", "score a test corpus"));
  auto* explain = add_common(app.add_subcommand("explain", "per-token saliency for one document"));
  auto* histogram =
      add_common(app.add_subcommand("histogram", "sub-emotion histograms per population"));
  auto* synth = add_common(app.add_subcommand("synth", "generate synthetic fixture files"));

  explain->add_option("--doc", doc_id, "document id to explain")->required();
  explain->add_option("--corpus", corpus_name, "corpus holding the document (train, val, test)");
  for (auto* sub : {evaluate, explain, histogram})
    sub->add_option("--model", model_override, "model file (default: paths.model)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    RunConfig cfg = load_config(config_path, overrides);
    if (const char* env = std::getenv("DEEPBOSE_THREADS")) {
      const int t = std::atoi(env);
      if (t >= 1) cfg.threads = t;
    }
    if (!model_override.empty()) cfg.model_path = model_override;

    if (prepare->parsed())
      cmd_prepare_codebook(cfg);
    else if (baseline->parsed())
      cmd_baseline(cfg);
    else if (train->parsed())
      cmd_train(cfg);
    else if (evaluate->parsed())
      cmd_evaluate(cfg);
    else if (explain->parsed())
      cmd_explain(cfg, doc_id, corpus_name);
    else if (histogram->parsed())
      cmd_histogram(cfg);
    else if (synth->parsed())
      cmd_synth(cfg);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error (" << stage << "): " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error (" << stage << "): " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error (" << stage << "): " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error (" << stage << "): " << e.what() << "\n";
    return 1;
  }
}

}  // namespace deepbose
