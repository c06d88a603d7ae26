// Offline bag-of-sub-emotions baseline: hard assignment of tokens to their
// nearest codevector, unigram/bigram count features, sublinear TF with
// smoothed IDF, and a logistic-regression classifier. The unigram IDF also
// initializes the differentiable model's attention weights.
#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <vector>

#include "deepbose/clustering.hpp"
#include "deepbose/core.hpp"
#include "deepbose/model.hpp"
#include "deepbose/text_io.hpp"

namespace deepbose {

// Sub-emotion index per kept token.
using LabelSequence = std::vector<std::size_t>;

struct SparseCounts {
  std::size_t space = 0;                      // K for unigrams, K*K for bigrams
  std::map<std::size_t, std::size_t> counts;  // feature index -> count >= 1
};

struct IdfVector {
  std::vector<double> values;
  std::size_t n_docs = 0;
};

// Nearest codevector per token under cosine dissimilarity; ties go to the
// lowest index.
inline LabelSequence hard_assign(const EmbeddedDoc& doc, const Codebook& cb) {
  if (doc.matrix.rows() == 0) throw DataError("hard assignment of an empty document");
  if (doc.matrix.cols() != cb.dim())
    throw ConfigError("embedding dimension does not match codebook dimension");

  LabelSequence seq(doc.matrix.rows());
  for (std::size_t j = 0; j < doc.matrix.rows(); ++j) {
    std::size_t best = 0;
    double best_d = cosine_dissimilarity(doc.matrix.row(j), cb.codevectors.row(0));
    for (std::size_t k = 1; k < cb.total(); ++k) {
      const double d = cosine_dissimilarity(doc.matrix.row(j), cb.codevectors.row(k));
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    seq[j] = best;
  }
  return seq;
}

// Unigram (n=1) or adjacent-bigram (n=2) counts over sub-emotion labels.
// Bigram feature index = first * K + second.
inline SparseCounts ngram_counts(const LabelSequence& seq, int n, std::size_t K) {
  if (n != 1 && n != 2) throw ConfigError("only unigram and bigram counts are supported");
  if (seq.size() < static_cast<std::size_t>(n))
    throw DataError("label sequence shorter than the n-gram order");
  for (std::size_t label : seq)
    if (label >= K) throw ConfigError("label outside [0, K)");

  SparseCounts out;
  if (n == 1) {
    out.space = K;
    for (std::size_t label : seq) ++out.counts[label];
  } else {
    out.space = K * K;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) ++out.counts[seq[i] * K + seq[i + 1]];
  }
  return out;
}

// Smoothed IDF ln((1+N)/(1+df)) + 1; strictly positive, defined for unseen
// features.
inline IdfVector compute_idf(const std::vector<SparseCounts>& docs, std::size_t space) {
  if (docs.empty()) throw DataError("IDF needs at least one document");
  std::vector<std::size_t> df(space, 0);
  for (const auto& doc : docs) {
    if (doc.space != space) throw ConfigError("feature space mismatch in IDF computation");
    for (const auto& [f, c] : doc.counts)
      if (c > 0) ++df[f];
  }
  IdfVector idf;
  idf.n_docs = docs.size();
  idf.values.resize(space);
  const double n = static_cast<double>(docs.size());
  for (std::size_t f = 0; f < space; ++f)
    idf.values[f] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[f]))) + 1.0;
  return idf;
}

// Dense TF-IDF: s(c) * idf_f with sublinear s(0) = 0 and s(c) = ln(c) + 1
// for c >= 1 (so singleton counts keep weight, unlike the differentiable
// rectifier).
inline std::vector<double> tfidf_vector(const SparseCounts& counts, const IdfVector& idf) {
  if (counts.space != idf.values.size())
    throw ConfigError("feature space mismatch between counts and IDF");
  std::vector<double> out(counts.space, 0.0);
  for (const auto& [f, c] : counts.counts)
    if (c > 0)
      out[f] = (std::log(static_cast<double>(c)) + 1.0) * idf.values[f];
  return out;
}

struct LinearClassifier {
  std::vector<double> weights;
  double bias = 0.0;

  double predict(const std::vector<double>& x) const {
    return detail::stable_sigmoid(bias + dot(weights, x));
  }
};

// Logistic regression by full-batch gradient descent on L2-regularized
// cross-entropy (bias unregularized). Deterministic in `seed`.
inline LinearClassifier baseline_train(const std::vector<std::vector<double>>& features,
                                       const std::vector<int>& labels, double l2 = 1e-4,
                                       int epochs = 200, double lr = 0.1,
                                       std::uint64_t seed = 42) {
  if (features.empty() || features.size() != labels.size())
    throw ConfigError("baseline training needs matching non-empty features and labels");
  if (l2 < 0.0 || lr <= 0.0 || epochs < 0)
    throw ConfigError("baseline hyperparameters out of range");
  const std::size_t F = features[0].size();
  for (const auto& x : features)
    if (x.size() != F) throw ConfigError("baseline feature vectors differ in length");
  bool has[2] = {false, false};
  for (int y : labels) {
    if (y != 0 && y != 1) throw ConfigError("label must be 0 or 1");
    has[y] = true;
  }
  if (!has[0] || !has[1]) throw DataError("baseline training requires both classes");

  LinearClassifier clf;
  clf.weights.resize(F);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(F));
  for (auto& w : clf.weights) w = bound * (2.0 * detail::uniform01(rng) - 1.0);

  const double n = static_cast<double>(features.size());
  std::vector<double> gw(F);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const double err = clf.predict(features[i]) - static_cast<double>(labels[i]);
      for (std::size_t f = 0; f < F; ++f) gw[f] += err * features[i][f];
      gb += err;
    }
    for (std::size_t f = 0; f < F; ++f)
      clf.weights[f] -= lr * (gw[f] / n + l2 * clf.weights[f]);
    clf.bias -= lr * gb / n;
  }
  return clf;
}

// Unigram document frequencies of the hard assignments, as smoothed IDF;
// the initial value of the attention weights.
inline std::vector<double> init_idf_weights(const Corpus& corpus, const EmbeddingTable& table,
                                            const Codebook& cb, std::size_t max_tokens = 20000,
                                            std::vector<std::string>* warnings = nullptr) {
  if (corpus.documents.empty()) throw DataError("IDF initialization needs a non-empty corpus");
  std::vector<SparseCounts> per_doc;
  for (const auto& doc : corpus.documents) {
    EmbeddedDoc embedded;
    try {
      embedded = embed_document(doc, table, max_tokens);
    } catch (const DataError&) {
      detail::warn(warnings, "document '" + doc.id + "' skipped in IDF init: no in-vocabulary tokens");
      continue;
    }
    per_doc.push_back(ngram_counts(hard_assign(embedded, cb), 1, cb.total()));
  }
  if (per_doc.empty()) throw DataError("no usable documents for IDF initialization");
  return compute_idf(per_doc, cb.total()).values;
}

}  // namespace deepbose
