// Interpretability and evaluation: per-token gradient saliency, population
// sub-emotion histograms, and threshold-based binary classification
// metrics.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "deepbose/gradient.hpp"
#include "deepbose/model.hpp"
#include "deepbose/text_io.hpp"

namespace deepbose {

struct SaliencyMap {
  std::string id;
  std::vector<std::string> tokens;  // kept in-vocabulary tokens, in order
  std::vector<double> scores;       // one non-negative score per token
  double prediction = 0.0;
};

struct EmotionHistogram {
  std::vector<double> mean_weights;        // K entries
  std::vector<std::string> emotion_names;  // K entries, block name per index
  std::string population;
  std::size_t n_docs = 0;
};

struct MetricReport {
  double f1_positive = 0.0;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Per-token importance: the absolute gradient of the prediction (not the
// loss) in each embedding component, summed over the token's components.
inline SaliencyMap saliency(const EmbeddedDoc& doc, const ModelParams& params,
                            const std::string& id = {}) {
  if (doc.matrix.rows() == 0) throw DataError("saliency of an empty document");
  const ForwardCache cache = forward(doc.matrix, params, RunMode::Eval);
  const Gradients g = backward_prediction(doc.matrix, params, cache);

  SaliencyMap map;
  map.id = id;
  map.tokens = doc.kept_tokens;
  map.prediction = cache.prediction;
  map.scores.resize(doc.matrix.rows());
  for (std::size_t j = 0; j < doc.matrix.rows(); ++j) {
    double s = 0.0;
    for (double v : g.input.row(j)) s += std::abs(v);
    map.scores[j] = s;
  }
  return map;
}

// Mean feature vector of one labelled population. The histogram always
// reads the TF-IDF path (sum pooling, rectifier, IDF attention) in eval
// mode, independent of the pooling the classifier head was trained with.
inline EmotionHistogram emotion_histogram(const Corpus& corpus, const EmbeddingTable& table,
                                          const ModelParams& params, int label,
                                          std::size_t max_tokens = 20000,
                                          std::vector<std::string>* warnings = nullptr) {
  if (label != 0 && label != 1) throw ConfigError("population label must be 0 or 1");

  EmotionHistogram hist;
  hist.population = label == 1 ? "depressed" : "healthy";
  hist.mean_weights.assign(params.codebook.total(), 0.0);
  for (std::size_t b = 0; b < params.codebook.blocks.size(); ++b) {
    const auto& block = params.codebook.blocks[b];
    for (std::size_t i = 0; i < block.size; ++i) hist.emotion_names.push_back(block.emotion);
  }

  for (const auto& doc : corpus.documents) {
    if (!doc.label || *doc.label != label) continue;
    EmbeddedDoc embedded;
    try {
      embedded = embed_document(doc, table, max_tokens);
    } catch (const DataError&) {
      detail::warn(warnings, "document '" + doc.id + "' skipped: no in-vocabulary tokens");
      continue;
    }
    const SoftAssignment assign = dm_encode(embedded.matrix, params.codebook);
    const FeatureVector h = idf_attention(relou(pool_sum(assign)), params.idf_weights);
    for (std::size_t k = 0; k < h.size(); ++k) hist.mean_weights[k] += h[k];
    ++hist.n_docs;
  }
  if (hist.n_docs == 0)
    throw DataError("population '" + hist.population + "' has no usable documents");
  for (auto& v : hist.mean_weights) v /= static_cast<double>(hist.n_docs);
  return hist;
}

// Confusion counts at `threshold` (predict positive iff score >= threshold)
// and the derived metrics. Per-class values with zero denominators count as
// 0 in the macro averages.
inline MetricReport metrics(const std::vector<double>& predictions, const std::vector<int>& labels,
                            double threshold = 0.5) {
  if (predictions.size() != labels.size())
    throw ConfigError("metrics: prediction and label counts differ");
  if (predictions.empty()) throw ConfigError("metrics: no samples");

  MetricReport r;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ConfigError("label must be 0 or 1");
    const bool hat = predictions[i] >= threshold;
    if (hat && labels[i] == 1)
      ++r.tp;
    else if (hat)
      ++r.fp;
    else if (labels[i] == 1)
      ++r.fn;
    else
      ++r.tn;
  }
  const auto safe = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
  const double n = static_cast<double>(predictions.size());
  const double p_pos = safe(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fp));
  const double rec_pos = safe(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fn));
  const double p_neg = safe(static_cast<double>(r.tn), static_cast<double>(r.tn + r.fn));
  const double rec_neg = safe(static_cast<double>(r.tn), static_cast<double>(r.tn + r.fp));
  r.accuracy = static_cast<double>(r.tp + r.tn) / n;
  r.f1_positive = safe(2.0 * p_pos * rec_pos, p_pos + rec_pos);
  r.macro_precision = (p_pos + p_neg) / 2.0;
  r.macro_recall = (rec_pos + rec_neg) / 2.0;
  return r;
}

}  // namespace deepbose
