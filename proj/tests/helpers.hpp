// Shared fixtures and oracles: random micro-models wired away from
// activation kinks, central finite differences, and a temp-dir guard for
// file-format tests.
#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "deepbose/gradient.hpp"
#include "deepbose/model.hpp"

namespace testutil {

using namespace deepbose;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

inline double gauss(std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(rng);
}

// Random non-zero rows with norms spread around [0.5, 2].
inline Matrix random_rows(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  Matrix x(n, m);
  for (std::size_t r = 0; r < n; ++r) {
    double norm = 0.0;
    do {
      for (std::size_t c = 0; c < m; ++c) x(r, c) = gauss(rng);
      norm = l2_norm(x.row(r));
    } while (norm < 1e-6);
    const double scale = uniform(rng, 0.5, 2.0) / norm;
    for (std::size_t c = 0; c < m; ++c) x(r, c) *= scale;
  }
  return x;
}

struct MicroFixture {
  ModelParams params;
  Matrix x;
  int label = 1;
  double w_pos = 1.0, w_neg = 1.0;
};

// m=8, K=6 in two blocks, dense 6 -> 16 -> 16 -> 1, ten tokens. Rejects
// draws that land near the rectifier kink (|pooled-1| <= 0.05), near a ReLU
// kink (|preact| <= 1e-3), or with a saturated output, so finite
// differences stay trustworthy.
inline MicroFixture make_micro_fixture(std::uint64_t seed) {
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    std::mt19937_64 rng(fnv1a_mix(fnv1a("micro-fixture"), seed * 1009 + attempt));
    MicroFixture f;
    f.params.codebook.alpha = uniform(rng, 5.0, 40.0);
    f.params.codebook.codevectors = random_rows(rng, 6, 8);
    f.params.codebook.biases.resize(6);
    for (auto& b : f.params.codebook.biases) b = uniform(rng, -0.5, 0.5);
    f.params.codebook.blocks = {{"anger", 3}, {"joy", 3}};
    f.params.idf_weights.resize(6);
    for (auto& w : f.params.idf_weights) w = uniform(rng, 0.5, 2.0);
    f.params.dense = dense_init(6, {16, 16}, rng());
    for (auto& layer : f.params.dense.layers)
      for (auto& b : layer.bias) b = uniform(rng, -0.2, 0.2);
    f.params.dropout_rate = 0.0;
    f.params.pooling = Pooling::SumTfidf;
    f.x = random_rows(rng, 10, 8);
    f.label = rng() % 2;
    f.w_pos = uniform(rng, 0.5, 3.0);
    f.w_neg = uniform(rng, 0.5, 3.0);

    const ForwardCache cache = forward(f.x, f.params, RunMode::Eval);
    bool ok = cache.prediction > 0.05 && cache.prediction < 0.95;
    for (double c : cache.pooled)
      if (std::abs(c - 1.0) <= 0.05) ok = false;
    for (std::size_t l = 0; ok && l + 1 < cache.layers.size(); ++l)
      for (double z : cache.layers[l].preact)
        if (std::abs(z) <= 1e-3) ok = false;
    if (ok) return f;
  }
  throw std::runtime_error("could not place a micro fixture away from kinks");
}

inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

// Central finite difference in one slot of a live structure.
template <class F>
double central_fd(double& slot, double step, F&& eval) {
  const double orig = slot;
  slot = orig + step;
  const double up = eval();
  slot = orig - step;
  const double down = eval();
  slot = orig;
  return (up - down) / (2.0 * step);
}

// Every (analytic gradient, live parameter slot) pair of a fixture,
// including the input rows.
struct Slot {
  double* param;
  double analytic;
  const char* group;
};

inline std::vector<Slot> gradient_slots(MicroFixture& f, const Gradients& g) {
  std::vector<Slot> slots;
  auto& cb = f.params.codebook;
  for (std::size_t i = 0; i < cb.codevectors.size(); ++i)
    slots.push_back({&cb.codevectors.data()[i], g.codevectors.data()[i], "codevectors"});
  for (std::size_t i = 0; i < cb.biases.size(); ++i)
    slots.push_back({&cb.biases[i], g.biases[i], "biases"});
  for (std::size_t i = 0; i < f.params.idf_weights.size(); ++i)
    slots.push_back({&f.params.idf_weights[i], g.idf[i], "idf"});
  for (std::size_t l = 0; l < f.params.dense.layers.size(); ++l) {
    auto& layer = f.params.dense.layers[l];
    for (std::size_t i = 0; i < layer.weights.size(); ++i)
      slots.push_back({&layer.weights.data()[i], g.dense[l].weights.data()[i], "dense weights"});
    for (std::size_t i = 0; i < layer.bias.size(); ++i)
      slots.push_back({&layer.bias[i], g.dense[l].bias[i], "dense bias"});
  }
  for (std::size_t i = 0; i < f.x.size(); ++i)
    slots.push_back({&f.x.data()[i], g.input.data()[i], "input"});
  return slots;
}

class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / ("deepbose-test-" + std::to_string(counter_++));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

}  // namespace testutil
