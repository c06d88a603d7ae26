// Forward pass of the differentiable bag-of-sub-emotions model: soft
// assignment of token embeddings onto the codebook, pooling, logarithmic
// rectification, IDF attention, then a small dense head ending in a
// sigmoid.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "deepbose/clustering.hpp"
#include "deepbose/core.hpp"

namespace deepbose {

enum class Pooling { SumTfidf, Average };
enum class RunMode { Train, Eval };
enum class Activation { Relu, Sigmoid };

using FeatureVector = std::vector<double>;

struct DenseLayer {
  Matrix weights;             // out_dim x in_dim
  std::vector<double> bias;   // out_dim
  Activation activation = Activation::Relu;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }
};

struct DenseStack {
  std::vector<DenseLayer> layers;
};

struct ModelParams {
  Codebook codebook;
  std::vector<double> idf_weights;  // K entries; used by SumTfidf pooling
  DenseStack dense;
  double dropout_rate = 0.2;
  Pooling pooling = Pooling::SumTfidf;
};

// Soft assignment of n token embeddings onto K codevectors, with the
// intermediates the backward pass needs.
struct SoftAssignment {
  Matrix s;                          // n x K, rows on the simplex
  Matrix dissim;                     // n x K cosine dissimilarities
  std::vector<double> input_norms;   // n
  std::vector<double> code_norms;    // K
};

struct LayerCache {
  std::vector<double> preact;   // z = W x + b
  std::vector<double> act;      // activation(z)
  std::vector<double> mask;     // inverted-dropout factors; empty when unused
  std::vector<double> out;      // input to the next layer
};

struct ForwardCache {
  SoftAssignment assign;
  FeatureVector pooled;     // per-codevector pooled value
  FeatureVector rectified;  // after ReLoU (SumTfidf only)
  FeatureVector feature;    // dense-head input
  std::vector<LayerCache> layers;
  double prediction = 0.0;
  RunMode mode = RunMode::Eval;
};

// S(j,k) = softmax_k(-alpha * V(x_j, theta_k) + b_k), computed with the
// usual max-shift so extreme alphas stay finite.
inline SoftAssignment dm_encode(const Matrix& x, const Codebook& cb) {
  const std::size_t n = x.rows(), k = cb.total(), m = cb.dim();
  if (x.cols() != m)
    throw ConfigError("embedding dimension " + std::to_string(x.cols()) +
                      " does not match codebook dimension " + std::to_string(m));
  if (k == 0) throw ConfigError("codebook has no codevectors");

  SoftAssignment out;
  out.s = Matrix(n, k);
  out.dissim = Matrix(n, k);
  out.input_norms.resize(n);
  out.code_norms.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    out.code_norms[c] = l2_norm(cb.codevectors.row(c));
    if (out.code_norms[c] == 0.0) throw NumericError("codebook contains a zero codevector");
  }

  std::vector<double> z(k);
  for (std::size_t j = 0; j < n; ++j) {
    auto xj = x.row(j);
    out.input_norms[j] = l2_norm(xj);
    if (out.input_norms[j] == 0.0) throw NumericError("token embedding is a zero vector");
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double cosv = dot(xj, cb.codevectors.row(c)) / (out.input_norms[j] * out.code_norms[c]);
      out.dissim(j, c) = 1.0 - cosv;
      z[c] = -cb.alpha * out.dissim(j, c) + cb.biases[c];
      zmax = std::max(zmax, z[c]);
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      out.s(j, c) = std::exp(z[c] - zmax);
      denom += out.s(j, c);
    }
    for (std::size_t c = 0; c < k; ++c) out.s(j, c) /= denom;
  }
  return out;
}

inline FeatureVector pool_sum(const SoftAssignment& a) {
  FeatureVector c(a.s.cols(), 0.0);
  for (std::size_t j = 0; j < a.s.rows(); ++j)
    for (std::size_t k = 0; k < a.s.cols(); ++k) c[k] += a.s(j, k);
  return c;
}

inline FeatureVector pool_average(const SoftAssignment& a) {
  FeatureVector c = pool_sum(a);
  const double n = static_cast<double>(a.s.rows());
  for (auto& v : c) v /= n;
  return c;
}

// Logarithmic rectifier: ln(x) + 1 beyond 1, zero at and below 1. Its
// derivative is 1/x beyond 1 and 0 otherwise (including at x = 1).
inline double relou(double x) { return x > 1.0 ? std::log(x) + 1.0 : 0.0; }
inline double relou_derivative(double x) { return x > 1.0 ? 1.0 / x : 0.0; }

inline FeatureVector relou(const FeatureVector& x) {
  FeatureVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = relou(x[i]);
  return out;
}

inline FeatureVector idf_attention(const FeatureVector& h, const std::vector<double>& idf) {
  if (h.size() != idf.size())
    throw ConfigError("IDF weight count does not match codebook size");
  FeatureVector out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i] * idf[i];
  return out;
}

namespace detail {

inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Uniform double in [0, 1) from raw generator bits; identical across
// standard libraries, unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Runs the dense head, appending a LayerCache per layer. In Train mode,
// inverted dropout follows every activation except the last layer's.
inline std::vector<LayerCache> dense_forward(const FeatureVector& input, const DenseStack& stack,
                                             double dropout_rate, RunMode mode,
                                             std::mt19937_64* rng = nullptr) {
  if (stack.layers.empty()) throw ConfigError("dense stack has no layers");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("dropout rate must lie in [0, 1)");
  const bool dropping = mode == RunMode::Train && dropout_rate > 0.0;
  if (dropping && !rng) throw ConfigError("dropout in train mode requires an RNG");

  std::vector<LayerCache> caches;
  caches.reserve(stack.layers.size());
  const FeatureVector* x = &input;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    const auto& layer = stack.layers[l];
    if (layer.in_dim() != x->size())
      throw ConfigError("dense layer " + std::to_string(l) + " expects input of size " +
                        std::to_string(layer.in_dim()) + ", got " + std::to_string(x->size()));
    if (layer.bias.size() != layer.out_dim())
      throw ConfigError("dense layer " + std::to_string(l) + " bias size mismatch");

    LayerCache cache;
    cache.preact.resize(layer.out_dim());
    cache.act.resize(layer.out_dim());
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      cache.preact[o] = layer.bias[o] + dot(layer.weights.row(o), *x);
      cache.act[o] = layer.activation == Activation::Relu
                         ? std::max(0.0, cache.preact[o])
                         : detail::stable_sigmoid(cache.preact[o]);
    }
    const bool last = l + 1 == stack.layers.size();
    if (dropping && !last) {
      cache.mask.resize(layer.out_dim());
      cache.out.resize(layer.out_dim());
      const double keep_scale = 1.0 / (1.0 - dropout_rate);
      for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        cache.mask[o] = detail::uniform01(*rng) < dropout_rate ? 0.0 : keep_scale;
        cache.out[o] = cache.act[o] * cache.mask[o];
      }
    } else {
      cache.out = cache.act;
    }
    caches.push_back(std::move(cache));
    x = &caches.back().out;
  }
  return caches;
}

// Full forward pass over one embedded document.
inline ForwardCache forward(const Matrix& x, const ModelParams& params, RunMode mode,
                            std::mt19937_64* rng = nullptr) {
  const auto& last = params.dense.layers;
  if (last.empty()) throw ConfigError("model has no dense layers");
  if (last.back().out_dim() != 1 || last.back().activation != Activation::Sigmoid)
    throw ConfigError("final dense layer must be a single sigmoid unit");

  ForwardCache cache;
  cache.mode = mode;
  cache.assign = dm_encode(x, params.codebook);
  if (params.pooling == Pooling::SumTfidf) {
    cache.pooled = pool_sum(cache.assign);
    cache.rectified = relou(cache.pooled);
    cache.feature = idf_attention(cache.rectified, params.idf_weights);
  } else {
    cache.pooled = pool_average(cache.assign);
    cache.feature = cache.pooled;
  }
  cache.layers = dense_forward(cache.feature, params.dense, params.dropout_rate, mode, rng);
  cache.prediction = cache.layers.back().act[0];
  return cache;
}

}  // namespace deepbose
