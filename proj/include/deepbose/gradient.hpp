// Exact reverse-mode gradients for the full model: dense head, dropout,
// IDF attention, logarithmic rectifier, pooling, soft-assignment softmax,
// and the cosine dissimilarities, plus weighted cross-entropy, class
// weighting, Adam, and Glorot initialization of the dense head.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "deepbose/core.hpp"
#include "deepbose/model.hpp"

namespace deepbose {

// -(w_pos y ln p + w_neg (1-y) ln(1-p)) with p clamped away from {0, 1}.
inline double weighted_bce(double y_hat, int y, double w_pos = 1.0, double w_neg = 1.0) {
  if (y != 0 && y != 1) throw ConfigError("label must be 0 or 1");
  const double p = std::clamp(y_hat, 1e-12, 1.0 - 1e-12);
  return y == 1 ? -w_pos * std::log(p) : -w_neg * std::log(1.0 - p);
}

struct ClassWeights {
  double positive = 1.0;
  double negative = 1.0;
};

// Inverse-frequency weights N / (2 N_c); requires both classes present.
inline ClassWeights class_weights(const std::vector<int>& labels) {
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ConfigError("label must be 0 or 1");
    if (y == 1) ++pos;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0)
    throw DataError("class weighting requires at least one document of each class");
  const double n = static_cast<double>(labels.size());
  return {n / (2.0 * static_cast<double>(pos)), n / (2.0 * static_cast<double>(neg))};
}

struct DenseGrad {
  Matrix weights;
  std::vector<double> bias;
};

struct Gradients {
  Matrix codevectors;            // K x m
  std::vector<double> biases;    // K
  std::vector<double> idf;       // K
  std::vector<DenseGrad> dense;
  Matrix input;                  // n x m, gradient in the token embeddings

  void add(const Gradients& g) {
    for (std::size_t i = 0; i < codevectors.size(); ++i)
      codevectors.data()[i] += g.codevectors.data()[i];
    for (std::size_t i = 0; i < biases.size(); ++i) biases[i] += g.biases[i];
    for (std::size_t i = 0; i < idf.size(); ++i) idf[i] += g.idf[i];
    for (std::size_t l = 0; l < dense.size(); ++l) {
      for (std::size_t i = 0; i < dense[l].weights.size(); ++i)
        dense[l].weights.data()[i] += g.dense[l].weights.data()[i];
      for (std::size_t i = 0; i < dense[l].bias.size(); ++i)
        dense[l].bias[i] += g.dense[l].bias[i];
    }
  }

  void scale(double f) {
    for (auto& v : codevectors.data()) v *= f;
    for (auto& v : biases) v *= f;
    for (auto& v : idf) v *= f;
    for (auto& l : dense) {
      for (auto& v : l.weights.data()) v *= f;
      for (auto& v : l.bias) v *= f;
    }
    for (auto& v : input.data()) v *= f;
  }
};

inline Gradients zero_gradients(const ModelParams& params, std::size_t n_tokens = 0) {
  Gradients g;
  g.codevectors = Matrix(params.codebook.total(), params.codebook.dim());
  g.biases.assign(params.codebook.total(), 0.0);
  g.idf.assign(params.idf_weights.size(), 0.0);
  for (const auto& layer : params.dense.layers) {
    DenseGrad dg;
    dg.weights = Matrix(layer.out_dim(), layer.in_dim());
    dg.bias.assign(layer.out_dim(), 0.0);
    g.dense.push_back(std::move(dg));
  }
  if (n_tokens) g.input = Matrix(n_tokens, params.codebook.dim());
  return g;
}

namespace detail {

// Reverse pass from a seed gradient in the final pre-activation. Both loss
// and prediction gradients share everything below the output unit.
inline Gradients backprop(const Matrix& x, const ModelParams& params, const ForwardCache& cache,
                          double seed) {
  Gradients g = zero_gradients(params, x.rows());
  const auto& layers = params.dense.layers;
  const std::size_t L = layers.size();

  // Dense head, output layer first. For the last layer the seed already
  // sits in pre-activation space; hidden layers convert output gradients
  // through dropout masks and activation derivatives.
  std::vector<double> d_out;  // gradient in layer l's post-dropout output
  std::vector<double> dz{seed};
  for (std::size_t li = L; li-- > 0;) {
    const auto& layer = layers[li];
    const auto& cache_l = cache.layers[li];
    if (li + 1 != L) {
      dz.assign(layer.out_dim(), 0.0);
      for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        double da = d_out[o];
        if (!cache_l.mask.empty()) da *= cache_l.mask[o];
        if (layer.activation == Activation::Relu) {
          dz[o] = cache_l.preact[o] > 0.0 ? da : 0.0;
        } else {
          dz[o] = da * cache_l.act[o] * (1.0 - cache_l.act[o]);
        }
      }
    }
    const std::vector<double>& input =
        li == 0 ? cache.feature : cache.layers[li - 1].out;
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      g.dense[li].bias[o] = dz[o];
      for (std::size_t i = 0; i < layer.in_dim(); ++i)
        g.dense[li].weights(o, i) = dz[o] * input[i];
    }
    d_out.assign(layer.in_dim(), 0.0);
    for (std::size_t o = 0; o < layer.out_dim(); ++o)
      for (std::size_t i = 0; i < layer.in_dim(); ++i)
        d_out[i] += dz[o] * layer.weights(o, i);
  }

  // d_out now holds the gradient in the dense-head input (the feature
  // vector). Unwind the pooling branch into per-token assignment space.
  const std::size_t K = params.codebook.total();
  const std::size_t n = x.rows();
  Matrix ds(n, K);
  if (params.pooling == Pooling::SumTfidf) {
    for (std::size_t k = 0; k < K; ++k) {
      g.idf[k] = d_out[k] * cache.rectified[k];
      const double dc = d_out[k] * params.idf_weights[k] * relou_derivative(cache.pooled[k]);
      for (std::size_t j = 0; j < n; ++j) ds(j, k) = dc;
    }
  } else {
    for (std::size_t k = 0; k < K; ++k) {
      const double dc = d_out[k] / static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) ds(j, k) = dc;
    }
  }

  // Softmax rows, then the dissimilarity kernel.
  const double alpha = params.codebook.alpha;
  for (std::size_t j = 0; j < n; ++j) {
    auto xj = x.row(j);
    const double nx = cache.assign.input_norms[j];
    double inner = 0.0;
    for (std::size_t k = 0; k < K; ++k) inner += ds(j, k) * cache.assign.s(j, k);
    for (std::size_t k = 0; k < K; ++k) {
      const double dzjk = cache.assign.s(j, k) * (ds(j, k) - inner);
      if (dzjk == 0.0) continue;
      g.biases[k] += dzjk;
      const double dV = -alpha * dzjk;
      auto tk = params.codebook.codevectors.row(k);
      const double nt = cache.assign.code_norms[k];
      const double cosv = 1.0 - cache.assign.dissim(j, k);
      for (std::size_t d = 0; d < tk.size(); ++d) {
        g.codevectors(k, d) += dV * (cosv * tk[d] / (nt * nt) - xj[d] / (nx * nt));
        g.input(j, d) += dV * (cosv * xj[d] / (nx * nx) - tk[d] / (nx * nt));
      }
    }
  }
  return g;
}

}  // namespace detail

// Gradient of the weighted cross-entropy at a completed forward pass. The
// sigmoid and the loss combine into a stable seed in the final
// pre-activation: w_neg (1-y) p - w_pos y (1-p).
inline Gradients backward(const Matrix& x, const ModelParams& params, const ForwardCache& cache,
                          int y, double w_pos = 1.0, double w_neg = 1.0) {
  if (y != 0 && y != 1) throw ConfigError("label must be 0 or 1");
  const double p = cache.prediction;
  const double seed = y == 1 ? -w_pos * (1.0 - p) : w_neg * p;
  return detail::backprop(x, params, cache, seed);
}

// Gradient of the prediction itself (not the loss); used for saliency.
inline Gradients backward_prediction(const Matrix& x, const ModelParams& params,
                                     const ForwardCache& cache) {
  const double p = cache.prediction;
  return detail::backprop(x, params, cache, p * (1.0 - p));
}

struct AdamState {
  Gradients m, v;
  int t = 0;
};

inline AdamState adam_init(const ModelParams& params) {
  return {zero_gradients(params), zero_gradients(params), 0};
}

// One bias-corrected Adam update over every trainable group. Groups whose
// gradients are identically zero (frozen or untouched) never move.
inline void adam_step(ModelParams& params, const Gradients& g, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  ++state.t;
  const double c1 = 1.0 - std::pow(beta1, state.t);
  const double c2 = 1.0 - std::pow(beta2, state.t);
  auto update = [&](double& param, double& m, double& v, double grad) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    param -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
  };

  for (std::size_t i = 0; i < params.codebook.codevectors.size(); ++i)
    update(params.codebook.codevectors.data()[i], state.m.codevectors.data()[i],
           state.v.codevectors.data()[i], g.codevectors.data()[i]);
  for (std::size_t i = 0; i < params.codebook.biases.size(); ++i)
    update(params.codebook.biases[i], state.m.biases[i], state.v.biases[i], g.biases[i]);
  for (std::size_t i = 0; i < params.idf_weights.size(); ++i)
    update(params.idf_weights[i], state.m.idf[i], state.v.idf[i], g.idf[i]);
  for (std::size_t l = 0; l < params.dense.layers.size(); ++l) {
    auto& layer = params.dense.layers[l];
    for (std::size_t i = 0; i < layer.weights.size(); ++i)
      update(layer.weights.data()[i], state.m.dense[l].weights.data()[i],
             state.v.dense[l].weights.data()[i], g.dense[l].weights.data()[i]);
    for (std::size_t i = 0; i < layer.bias.size(); ++i)
      update(layer.bias[i], state.m.dense[l].bias[i], state.v.dense[l].bias[i],
             g.dense[l].bias[i]);
  }
}

// Glorot-uniform dense head: hidden ReLU layers of the given widths, then
// one sigmoid output unit. Biases start at zero.
inline DenseStack dense_init(std::size_t input_dim, const std::vector<int>& hidden_widths,
                             std::uint64_t seed) {
  if (input_dim == 0) throw ConfigError("dense input dimension must be positive");
  for (int w : hidden_widths)
    if (w <= 0) throw ConfigError("dense hidden widths must be positive");

  std::mt19937_64 rng(seed);
  DenseStack stack;
  std::size_t in_dim = input_dim;
  auto make_layer = [&](std::size_t out_dim, Activation act) {
    DenseLayer layer;
    layer.weights = Matrix(out_dim, in_dim);
    layer.bias.assign(out_dim, 0.0);
    layer.activation = act;
    const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    for (auto& w : layer.weights.data())
      w = bound * (2.0 * detail::uniform01(rng) - 1.0);
    stack.layers.push_back(std::move(layer));
    in_dim = out_dim;
  };
  for (int w : hidden_widths) make_layer(static_cast<std::size_t>(w), Activation::Relu);
  make_layer(1, Activation::Sigmoid);
  return stack;
}

}  // namespace deepbose
