// Supervised training: mini-batch Adam on the weighted cross-entropy with
// deterministic shuffling, per-sample dropout streams that do not depend on
// thread count, early stopping on validation F1, and best-epoch parameter
// selection.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "deepbose/core.hpp"
#include "deepbose/gradient.hpp"
#include "deepbose/interpret.hpp"
#include "deepbose/model.hpp"
#include "deepbose/text_io.hpp"

namespace deepbose {

struct TrainConfig {
  double lr = 1e-5;
  int epochs = 100;            // 0 is a no-op that returns params unchanged
  int batch_size = 16;         // full batch is used when the corpus has < 64 docs
  std::uint64_t seed = 42;
  bool class_weighted = true;
  double threshold = 0.5;      // decision threshold for validation F1
  int patience = 10;           // epochs without a new best; <= 0 disables
  bool freeze_codebook = false;
  bool freeze_biases = false;
  bool freeze_idf = false;
  bool freeze_dense = false;
  int threads = 1;
  std::size_t max_doc_tokens = 20000;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;  // one entry per epoch actually run
  int best_epoch = 0;
  double best_val_f1 = 0.0;
};

namespace detail {

struct EmbeddedSample {
  Matrix x;
  int label = 0;
};

inline std::vector<EmbeddedSample> embed_labelled(const Corpus& corpus,
                                                  const EmbeddingTable& table,
                                                  std::size_t max_tokens,
                                                  std::vector<std::string>* warnings) {
  std::vector<EmbeddedSample> out;
  for (const auto& doc : corpus.documents) {
    if (!doc.label) {
      warn(warnings, "document '" + doc.id + "' has no label; dropped from training");
      continue;
    }
    try {
      out.push_back({embed_document(doc, table, max_tokens).matrix, *doc.label});
    } catch (const DataError&) {
      warn(warnings, "document '" + doc.id + "' has no in-vocabulary tokens; dropped");
    }
  }
  return out;
}

inline void apply_freeze(Gradients& g, const TrainConfig& cfg) {
  if (cfg.freeze_codebook) std::fill(g.codevectors.data().begin(), g.codevectors.data().end(), 0.0);
  if (cfg.freeze_biases) std::fill(g.biases.begin(), g.biases.end(), 0.0);
  if (cfg.freeze_idf) std::fill(g.idf.begin(), g.idf.end(), 0.0);
  if (cfg.freeze_dense)
    for (auto& l : g.dense) {
      std::fill(l.weights.data().begin(), l.weights.data().end(), 0.0);
      std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
}

}  // namespace detail

// Stratified sample of roughly `val_fraction` of the labelled documents,
// deterministic in `seed`; both halves keep the original corpus order. A
// class with a single document stays entirely in the training half.
struct SplitResult {
  Corpus train;
  Corpus val;
};

inline SplitResult stratified_split(const Corpus& corpus, double val_fraction, std::uint64_t seed,
                                    std::vector<std::string>* warnings = nullptr) {
  if (!(val_fraction > 0.0) || val_fraction >= 1.0)
    throw ConfigError("validation fraction must lie in (0, 1)");

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    const auto& doc = corpus.documents[i];
    if (!doc.label) {
      detail::warn(warnings, "document '" + doc.id + "' has no label; excluded from split");
      continue;
    }
    by_class[*doc.label].push_back(i);
  }

  std::vector<bool> in_val(corpus.documents.size(), false);
  std::mt19937_64 rng(fnv1a_mix(fnv1a("stratified-split"), seed));
  for (auto& indices : by_class) {
    if (indices.size() < 2) continue;
    std::shuffle(indices.begin(), indices.end(), rng);
    const auto want = static_cast<std::size_t>(std::lround(val_fraction * indices.size()));
    const std::size_t take = std::clamp<std::size_t>(want, 1, indices.size() - 1);
    for (std::size_t i = 0; i < take; ++i) in_val[indices[i]] = true;
  }

  SplitResult split;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    if (!corpus.documents[i].label) continue;
    (in_val[i] ? split.val : split.train).documents.push_back(corpus.documents[i]);
  }
  return split;
}

// Mini-batch Adam over the labelled training corpus. Shuffling, dropout
// streams, and gradient summation are all deterministic functions of
// (cfg.seed, epoch, sample position), so the result is bit-identical across
// reruns and thread counts. Returns history; params end at the epoch with
// the best validation F1.
inline TrainHistory train_supervised(const Corpus& train, const Corpus& val,
                                     const EmbeddingTable& table, ModelParams& params,
                                     const TrainConfig& cfg,
                                     std::vector<std::string>* warnings = nullptr) {
  if (cfg.lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (cfg.threshold < 0.0 || cfg.threshold > 1.0)
    throw ConfigError("decision threshold must lie in [0, 1]");

  TrainHistory history;
  if (cfg.epochs == 0) return history;

  const auto train_set = detail::embed_labelled(train, table, cfg.max_doc_tokens, warnings);
  const auto val_set = detail::embed_labelled(val, table, cfg.max_doc_tokens, warnings);
  if (train_set.empty()) throw DataError("training corpus has no usable labelled documents");
  if (val_set.empty()) throw DataError("validation corpus has no usable labelled documents");

  std::vector<int> train_labels, val_labels;
  for (const auto& s : train_set) train_labels.push_back(s.label);
  for (const auto& s : val_set) val_labels.push_back(s.label);
  if (!std::count(train_labels.begin(), train_labels.end(), 1) ||
      !std::count(train_labels.begin(), train_labels.end(), 0))
    throw DataError("training corpus must contain both classes");

  ClassWeights w;
  if (cfg.class_weighted) w = class_weights(train_labels);

  const std::size_t n = train_set.size();
  const std::size_t batch =
      n < 64 ? n : std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);

  AdamState adam = adam_init(params);
  ModelParams best = params;
  double best_f1 = -1.0;
  int best_epoch = 0;

  std::vector<std::size_t> order(n);
  std::vector<Gradients> slot_grads(batch);
  std::vector<double> slot_loss(batch);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 shuffle_rng(fnv1a_mix(fnv1a_mix(fnv1a("epoch-shuffle"), cfg.seed),
                                          static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t count = std::min(batch, n - start);
      parallel_for(count, cfg.threads, [&](std::size_t i) {
        const std::size_t pos = start + i;
        const auto& sample = train_set[order[pos]];
        std::mt19937_64 dropout_rng(
            fnv1a_mix(fnv1a_mix(fnv1a_mix(fnv1a("dropout"), cfg.seed),
                                static_cast<std::uint64_t>(epoch)),
                      static_cast<std::uint64_t>(pos)));
        const ForwardCache cache =
            forward(sample.x, params, RunMode::Train, &dropout_rng);
        slot_loss[i] = weighted_bce(cache.prediction, sample.label, w.positive, w.negative);
        slot_grads[i] = backward(sample.x, params, cache, sample.label, w.positive, w.negative);
      });
      Gradients total = zero_gradients(params);
      for (std::size_t i = 0; i < count; ++i) {
        total.add(slot_grads[i]);
        loss_sum += slot_loss[i];
      }
      total.scale(1.0 / static_cast<double>(count));
      detail::apply_freeze(total, cfg);
      adam_step(params, total, adam, cfg.lr);
    }

    std::vector<double> val_pred(val_set.size());
    parallel_for(val_set.size(), cfg.threads, [&](std::size_t i) {
      val_pred[i] = forward(val_set[i].x, params, RunMode::Eval).prediction;
    });
    double val_loss = 0.0;
    for (std::size_t i = 0; i < val_set.size(); ++i)
      val_loss += weighted_bce(val_pred[i], val_set[i].label, w.positive, w.negative);
    val_loss /= static_cast<double>(val_set.size());
    const double val_f1 = metrics(val_pred, val_labels, cfg.threshold).f1_positive;

    history.epochs.push_back(
        {epoch, loss_sum / static_cast<double>(n), val_loss, val_f1});
    if (val_f1 > best_f1) {
      best_f1 = val_f1;
      best_epoch = epoch;
      best = params;
    }
    if (cfg.patience > 0 && epoch - best_epoch >= cfg.patience) break;
  }

  params = std::move(best);
  history.best_epoch = best_epoch;
  history.best_val_f1 = best_f1;
  return history;
}

}  // namespace deepbose
