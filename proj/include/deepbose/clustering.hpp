// Sub-emotion codebook construction: affinity propagation over the word
// vectors of each emotion (cosine dissimilarity), then unsupervised
// fine-tuning of the resulting codevectors with a shallow dissimilarity
// autoencoder trained by Adam.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deepbose/core.hpp"
#include "deepbose/text_io.hpp"

namespace deepbose {

// V(u, v) = 1 - cos(u, v). Requires non-zero vectors.
inline double cosine_dissimilarity(std::span<const double> u, std::span<const double> v) {
  const double nu = l2_norm(u), nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0)
    throw NumericError("cosine dissimilarity undefined for zero vector");
  return 1.0 - dot(u, v) / (nu * nv);
}

// D(i, j) = V(rows[i], rows[j]); symmetric with zero diagonal.
inline Matrix pairwise_dissimilarity(const Matrix& rows) {
  const std::size_t n = rows.rows();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = cosine_dissimilarity(rows.row(i), rows.row(j));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

struct ApConfig {
  double damping = 0.9;                     // in [0.5, 1)
  std::optional<double> preference = {};    // default: median off-diagonal similarity
  int max_iter = 200;
  int convergence_window = 15;              // iterations with a stable exemplar set
};

struct ApResult {
  std::vector<std::size_t> exemplars;       // ascending point indices
  std::vector<std::size_t> assignment;      // point -> index into exemplars
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) throw NumericError("median of empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return (v[mid - 1] + hi) / 2.0;
  }
  return hi;
}

}  // namespace detail

// Frey-Dueck affinity propagation on similarity = -dissimilarity, with
// damped responsibility/availability updates. Exemplars are the points k
// with R(k,k) + A(k,k) > 0; convergence means that set is non-empty and
// unchanged for convergence_window consecutive iterations. If the set is
// empty when iteration stops, the point with the largest R+A diagonal is
// promoted (lowest index on ties) so every input yields a clustering.
inline ApResult affinity_propagation(const Matrix& dissim, const ApConfig& cfg = {}) {
  const std::size_t n = dissim.rows();
  if (n == 0 || dissim.cols() != n)
    throw ConfigError("affinity propagation needs a square non-empty dissimilarity matrix");
  if (cfg.damping < 0.5 || cfg.damping >= 1.0)
    throw ConfigError("affinity propagation damping must lie in [0.5, 1)");
  if (cfg.max_iter < 1 || cfg.convergence_window < 1)
    throw ConfigError("affinity propagation iteration counts must be positive");

  ApResult res;
  if (n == 1) {
    res.exemplars = {0};
    res.assignment = {0};
    res.converged = true;
    return res;
  }

  Matrix s(n, n);
  std::vector<double> off_diag;
  off_diag.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        s(i, j) = -dissim(i, j);
        off_diag.push_back(s(i, j));
      }
  const double pref = cfg.preference ? *cfg.preference : detail::median(off_diag);
  for (std::size_t k = 0; k < n; ++k) s(k, k) = pref;

  Matrix r(n, n), a(n, n);
  std::vector<std::size_t> stable_exemplars;
  int stable_count = 0;

  auto current_exemplars = [&] {
    std::vector<std::size_t> ex;
    for (std::size_t k = 0; k < n; ++k)
      if (r(k, k) + a(k, k) > 0.0) ex.push_back(k);
    return ex;
  };

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    res.iterations = iter;

    // Responsibilities: R(i,k) <- S(i,k) - max_{k' != k} (A(i,k') + S(i,k')).
    for (std::size_t i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      double second = best;
      std::size_t best_k = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const double v = a(i, k) + s(i, k);
        if (v > best) {
          second = best;
          best = v;
          best_k = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (std::size_t k = 0; k < n; ++k) {
        const double target = s(i, k) - (k == best_k ? second : best);
        r(i, k) = cfg.damping * r(i, k) + (1.0 - cfg.damping) * target;
      }
    }

    // Availabilities: A(i,k) <- min(0, R(k,k) + sum_{i' != i,k} max(0, R(i',k)))
    // and A(k,k) <- sum_{i' != k} max(0, R(i',k)).
    for (std::size_t k = 0; k < n; ++k) {
      double pos_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (i != k) pos_sum += std::max(0.0, r(i, k));
      for (std::size_t i = 0; i < n; ++i) {
        double target;
        if (i == k) {
          target = pos_sum;
        } else {
          target = std::min(0.0, r(k, k) + pos_sum - std::max(0.0, r(i, k)));
        }
        a(i, k) = cfg.damping * a(i, k) + (1.0 - cfg.damping) * target;
      }
    }

    auto ex = current_exemplars();
    if (!ex.empty() && ex == stable_exemplars) {
      if (++stable_count >= cfg.convergence_window) {
        res.converged = true;
        break;
      }
    } else {
      stable_exemplars = std::move(ex);
      stable_count = stable_exemplars.empty() ? 0 : 1;
    }
  }

  res.exemplars = current_exemplars();
  if (res.exemplars.empty()) {
    std::size_t best = 0;
    double best_v = r(0, 0) + a(0, 0);
    for (std::size_t k = 1; k < n; ++k) {
      const double v = r(k, k) + a(k, k);
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    res.exemplars = {best};
  }

  // Assign each point to its most similar exemplar (exemplars to themselves).
  res.assignment.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best_e = 0;
    double best_s = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < res.exemplars.size(); ++e) {
      const std::size_t k = res.exemplars[e];
      if (k == i) {
        best_e = e;
        best_s = std::numeric_limits<double>::infinity();
        break;
      }
      if (s(i, k) > best_s) {
        best_s = s(i, k);
        best_e = e;
      }
    }
    res.assignment[i] = best_e;
  }
  return res;
}

// Copies the exemplar rows (ascending index order) out as the initial
// codevector block for one emotion.
inline Matrix init_block_from_ap(const Matrix& rows, const ApResult& ap) {
  Matrix block(ap.exemplars.size(), rows.cols());
  for (std::size_t e = 0; e < ap.exemplars.size(); ++e) {
    auto src = rows.row(ap.exemplars[e]);
    std::copy(src.begin(), src.end(), block.row(e).begin());
  }
  return block;
}

// Soft assignment S(j,k) = softmax_k(-alpha * V(x_j, theta_k)); the
// autoencoder reconstructs each input as theta~_j = sum_k S(j,k) theta_k.
// Returned pair: (assignment matrix S, reconstruction matrix theta~).
inline std::pair<Matrix, Matrix> dmae_reconstruct(const Matrix& x, const Matrix& theta,
                                                  double alpha) {
  const std::size_t n = x.rows(), k = theta.rows(), m = x.cols();
  if (theta.cols() != m) throw ConfigError("dmae_reconstruct: dimension mismatch");
  Matrix s(n, k), recon(n, m);
  std::vector<double> z(k);
  for (std::size_t j = 0; j < n; ++j) {
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      z[c] = -alpha * cosine_dissimilarity(x.row(j), theta.row(c));
      zmax = std::max(zmax, z[c]);
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      s(j, c) = std::exp(z[c] - zmax);
      denom += s(j, c);
    }
    for (std::size_t c = 0; c < k; ++c) {
      s(j, c) /= denom;
      for (std::size_t d = 0; d < m; ++d) recon(j, d) += s(j, c) * theta(c, d);
    }
  }
  return {std::move(s), std::move(recon)};
}

struct DmaeConfig {
  double alpha = 100.0;
  double lr = 1e-5;
  int epochs = 100;
};

struct DmaeTrainLog {
  std::vector<double> loss;  // epochs + 1 entries; entry 0 is the initial loss
};

namespace detail {

// Mean reconstruction loss (1/N) sum_j V(x_j, theta~_j) and, when grad is
// non-null, its full-batch gradient in the codevectors. The gradient has a
// decode path (through theta~ = S Theta directly) and an encode path
// (through S's dependence on Theta via the dissimilarities).
inline double dmae_loss_and_grad(const Matrix& x, const Matrix& theta, double alpha,
                                 Matrix* grad) {
  const std::size_t n = x.rows(), k = theta.rows(), m = x.cols();
  auto [s, recon] = dmae_reconstruct(x, theta, alpha);
  double loss = 0.0;
  if (grad) *grad = Matrix(k, m);

  std::vector<double> g_recon(m), ds(k), dz(k);
  for (std::size_t j = 0; j < n; ++j) {
    auto xj = x.row(j);
    auto rj = recon.row(j);
    const double nx = l2_norm(xj), nr = l2_norm(rj);
    if (nx == 0.0 || nr == 0.0)
      throw NumericError("autoencoder reconstruction collapsed to zero vector");
    const double cosv = dot(xj, rj) / (nx * nr);
    loss += (1.0 - cosv) / static_cast<double>(n);
    if (!grad) continue;

    // d loss / d recon_j, including the 1/N factor.
    for (std::size_t d = 0; d < m; ++d)
      g_recon[d] = (cosv * rj[d] / (nr * nr) - xj[d] / (nx * nr)) / static_cast<double>(n);

    // Decode path: recon_j = sum_c S(j,c) theta_c.
    for (std::size_t c = 0; c < k; ++c) {
      const double sc = s(j, c);
      for (std::size_t d = 0; d < m; ++d) (*grad)(c, d) += sc * g_recon[d];
      ds[c] = dot(g_recon, theta.row(c));
    }

    // Encode path: back through the softmax, then through each
    // dissimilarity z_c = -alpha V(x_j, theta_c).
    double inner = 0.0;
    for (std::size_t c = 0; c < k; ++c) inner += ds[c] * s(j, c);
    for (std::size_t c = 0; c < k; ++c) dz[c] = s(j, c) * (ds[c] - inner);
    for (std::size_t c = 0; c < k; ++c) {
      const double dV = -alpha * dz[c];
      if (dV == 0.0) continue;
      auto tc = theta.row(c);
      const double nt = l2_norm(tc);
      const double cost = dot(xj, tc) / (nx * nt);
      for (std::size_t d = 0; d < m; ++d)
        (*grad)(c, d) += dV * (cost * tc[d] / (nt * nt) - xj[d] / (nx * nt));
    }
  }
  return loss;
}

}  // namespace detail

// Full-batch Adam on the codevectors of one emotion (biases stay frozen at
// zero during codebook construction). Logs the loss before training and
// after every epoch.
inline DmaeTrainLog train_dmae_block(const Matrix& x, Matrix& theta, const DmaeConfig& cfg) {
  if (cfg.alpha <= 0.0) throw ConfigError("dmae alpha must be positive");
  if (cfg.lr <= 0.0) throw ConfigError("dmae learning rate must be positive");
  if (cfg.epochs < 0) throw ConfigError("dmae epochs must be non-negative");

  DmaeTrainLog log;
  log.loss.push_back(detail::dmae_loss_and_grad(x, theta, cfg.alpha, nullptr));

  Matrix grad;
  Matrix m1(theta.rows(), theta.cols()), m2(theta.rows(), theta.cols());
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= cfg.epochs; ++t) {
    detail::dmae_loss_and_grad(x, theta, cfg.alpha, &grad);
    const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m1.data()[i] = b1 * m1.data()[i] + (1.0 - b1) * grad.data()[i];
      m2.data()[i] = b2 * m2.data()[i] + (1.0 - b2) * grad.data()[i] * grad.data()[i];
      theta.data()[i] -= cfg.lr * (m1.data()[i] / c1) / (std::sqrt(m2.data()[i] / c2) + eps);
    }
    log.loss.push_back(detail::dmae_loss_and_grad(x, theta, cfg.alpha, nullptr));
  }
  return log;
}

struct Codebook {
  struct Block {
    std::string emotion;
    std::size_t size = 0;  // number of codevectors for this emotion
  };
  double alpha = 100.0;
  Matrix codevectors;           // all blocks stacked, K x m
  std::vector<double> biases;   // K entries
  std::vector<Block> blocks;

  std::size_t total() const { return codevectors.rows(); }
  std::size_t dim() const { return codevectors.cols(); }

  // [first, last) row range of one emotion's block.
  std::pair<std::size_t, std::size_t> block_range(std::size_t b) const {
    std::size_t first = 0;
    for (std::size_t i = 0; i < b; ++i) first += blocks[i].size;
    return {first, first + blocks[b].size};
  }
};

struct CodebookConfig {
  ApConfig ap;
  DmaeConfig dmae;
  int threads = 1;
};

struct CodebookBuildResult {
  Codebook codebook;
  std::vector<ApResult> ap;          // per emotion
  std::vector<DmaeTrainLog> dmae;    // per emotion
  std::vector<std::size_t> words_used;  // in-vocabulary word count per emotion
};

// Per emotion: embed its in-vocabulary words, cluster with affinity
// propagation, then fine-tune the exemplar block with the autoencoder.
// Emotions run independently, so they parallelize cleanly.
inline CodebookBuildResult build_codebook(const Lexicon& lexicon, const EmbeddingTable& table,
                                          const CodebookConfig& cfg = {},
                                          std::vector<std::string>* warnings = nullptr) {
  const std::size_t E = lexicon.size();
  if (E == 0) throw DataError("cannot build a codebook from an empty lexicon");

  std::vector<Matrix> word_rows(E);
  std::vector<std::vector<std::string>> missing(E);
  for (std::size_t e = 0; e < E; ++e) {
    std::vector<const std::vector<double>*> rows;
    for (const auto& w : lexicon.emotions[e].words) {
      const auto* vec = table.find(w);
      if (vec)
        rows.push_back(vec);
      else
        missing[e].push_back(w);
    }
    if (rows.empty())
      throw DataError("emotion '" + lexicon.emotions[e].name +
                      "' has no words covered by the embedding table");
    word_rows[e] = Matrix(rows.size(), table.dim);
    for (std::size_t r = 0; r < rows.size(); ++r)
      std::copy(rows[r]->begin(), rows[r]->end(), word_rows[e].row(r).begin());
  }
  for (std::size_t e = 0; e < E; ++e)
    if (!missing[e].empty())
      detail::warn(warnings, "emotion '" + lexicon.emotions[e].name + "': " +
                                 std::to_string(missing[e].size()) +
                                 " word(s) missing from the embedding table");

  CodebookBuildResult out;
  out.ap.resize(E);
  out.dmae.resize(E);
  out.words_used.resize(E);
  std::vector<Matrix> blocks(E);

  parallel_for(E, cfg.threads, [&](std::size_t e) {
    out.words_used[e] = word_rows[e].rows();
    out.ap[e] = affinity_propagation(pairwise_dissimilarity(word_rows[e]), cfg.ap);
    blocks[e] = init_block_from_ap(word_rows[e], out.ap[e]);
    out.dmae[e] = train_dmae_block(word_rows[e], blocks[e], cfg.dmae);
  });

  std::size_t total = 0;
  for (const auto& b : blocks) total += b.rows();
  out.codebook.alpha = cfg.dmae.alpha;
  out.codebook.codevectors = Matrix(total, table.dim);
  out.codebook.biases.assign(total, 0.0);
  std::size_t row = 0;
  for (std::size_t e = 0; e < E; ++e) {
    out.codebook.blocks.push_back({lexicon.emotions[e].name, blocks[e].rows()});
    for (std::size_t r = 0; r < blocks[e].rows(); ++r, ++row)
      std::copy(blocks[e].row(r).begin(), blocks[e].row(r).end(),
                out.codebook.codevectors.row(row).begin());
  }
  return out;
}

}  // namespace deepbose
