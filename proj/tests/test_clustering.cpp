#include <doctest.h>

#include <algorithm>
#include <set>

#include "deepbose/clustering.hpp"
#include "helpers.hpp"

using namespace deepbose;

namespace {

// Three well-separated directions, two nearby points per direction. The
// within-pair spreads all differ so no two points play symmetric roles;
// otherwise heavily damped message passing can sit in a transient state
// (every point its own exemplar) long enough to be mistaken for converged.
Matrix three_pairs() {
  Matrix x(6, 4);
  const double spread[6] = {0.0, 0.35, 0.06, 0.44, 0.12, 0.52};
  for (int p = 0; p < 3; ++p)
    for (int i = 0; i < 2; ++i) {
      x(2 * p + i, p) = 1.0;
      x(2 * p + i, 3) = spread[2 * p + i];
    }
  return x;
}

}  // namespace

TEST_SUITE("clustering") {
  TEST_CASE("cosine dissimilarity basics") {
    const std::vector<double> a{1, 0}, b{0, 2}, c{3, 0}, d{-1, 0};
    CHECK(cosine_dissimilarity(a, c) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cosine_dissimilarity(a, b) == doctest::Approx(1.0));
    CHECK(cosine_dissimilarity(a, d) == doctest::Approx(2.0));
    const std::vector<double> zero{0, 0};
    CHECK_THROWS_AS(cosine_dissimilarity(a, zero), NumericError);
  }

  TEST_CASE("pairwise dissimilarity is symmetric with zero diagonal") {
    std::mt19937_64 rng(3);
    const Matrix x = testutil::random_rows(rng, 5, 4);
    const Matrix d = pairwise_dissimilarity(x);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(d(i, i) == 0.0);
      for (std::size_t j = 0; j < 5; ++j) CHECK(d(i, j) == d(j, i));
    }
  }

  TEST_CASE("affinity propagation recovers three separated pairs") {
    const Matrix x = three_pairs();
    const ApResult ap = affinity_propagation(pairwise_dissimilarity(x));
    REQUIRE(ap.exemplars.size() == 3);
    CHECK(ap.converged);
    // Each pair lands in one cluster, and distinct pairs in distinct ones.
    for (int p = 0; p < 3; ++p) CHECK(ap.assignment[2 * p] == ap.assignment[2 * p + 1]);
    std::set<std::size_t> clusters(ap.assignment.begin(), ap.assignment.end());
    CHECK(clusters.size() == 3);
  }

  TEST_CASE("affinity propagation handles degenerate inputs") {
    SUBCASE("single point") {
      const ApResult ap = affinity_propagation(Matrix(1, 1));
      CHECK(ap.exemplars == std::vector<std::size_t>{0});
      CHECK(ap.assignment == std::vector<std::size_t>{0});
      CHECK(ap.converged);
    }
    SUBCASE("identical points fall back to a single exemplar") {
      // All-zero dissimilarities: preferences equal similarities, so no
      // point ever dominates; the fallback must still produce a clustering.
      const ApResult ap = affinity_propagation(Matrix(4, 4));
      REQUIRE(ap.exemplars.size() == 1);
      CHECK(ap.exemplars[0] == 0);  // ties resolve to the lowest index
      for (auto a : ap.assignment) CHECK(a == 0);
    }
  }

  TEST_CASE("affinity propagation exemplars self-assign and are sorted") {
    std::mt19937_64 rng(17);
    const Matrix x = testutil::random_rows(rng, 12, 4);
    const ApResult ap = affinity_propagation(pairwise_dissimilarity(x));
    REQUIRE(!ap.exemplars.empty());
    CHECK(std::is_sorted(ap.exemplars.begin(), ap.exemplars.end()));
    for (std::size_t e = 0; e < ap.exemplars.size(); ++e)
      CHECK(ap.assignment[ap.exemplars[e]] == e);
    for (auto a : ap.assignment) CHECK(a < ap.exemplars.size());
  }

  TEST_CASE("affinity propagation is deterministic and validates config") {
    const Matrix d = pairwise_dissimilarity(three_pairs());
    const ApResult a = affinity_propagation(d);
    const ApResult b = affinity_propagation(d);
    CHECK(a.exemplars == b.exemplars);
    CHECK(a.assignment == b.assignment);
    CHECK(a.iterations == b.iterations);

    ApConfig bad;
    bad.damping = 0.3;
    CHECK_THROWS_AS(affinity_propagation(d, bad), ConfigError);
    CHECK_THROWS_AS(affinity_propagation(Matrix(2, 3)), ConfigError);
  }

  TEST_CASE("init_block_from_ap copies exemplar rows") {
    const Matrix x = three_pairs();
    const ApResult ap = affinity_propagation(pairwise_dissimilarity(x));
    const Matrix block = init_block_from_ap(x, ap);
    REQUIRE(block.rows() == ap.exemplars.size());
    for (std::size_t e = 0; e < ap.exemplars.size(); ++e)
      CHECK(std::equal(block.row(e).begin(), block.row(e).end(),
                       x.row(ap.exemplars[e]).begin()));
  }

  TEST_CASE("dmae_reconstruct rows are simplex mixtures of codevectors") {
    std::mt19937_64 rng(5);
    const Matrix x = testutil::random_rows(rng, 7, 4);
    const Matrix theta = testutil::random_rows(rng, 3, 4);
    const auto [s, recon] = dmae_reconstruct(x, theta, 25.0);
    REQUIRE(s.rows() == 7);
    REQUIRE(recon.rows() == 7);
    for (std::size_t j = 0; j < 7; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(s(j, k) > 0.0);
        sum += s(j, k);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      for (std::size_t d = 0; d < 4; ++d) {
        double expect = 0.0;
        for (std::size_t k = 0; k < 3; ++k) expect += s(j, k) * theta(k, d);
        CHECK(recon(j, d) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("autoencoder gradient matches finite differences") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 5; ++trial) {
      const Matrix x = testutil::random_rows(rng, 6, 4);
      Matrix theta = testutil::random_rows(rng, 3, 4);
      const double alpha = testutil::uniform(rng, 2.0, 30.0);
      Matrix grad;
      detail::dmae_loss_and_grad(x, theta, alpha, &grad);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double numeric = testutil::central_fd(theta.data()[i], 1e-6, [&] {
          return detail::dmae_loss_and_grad(x, theta, alpha, nullptr);
        });
        CHECK(testutil::rel_err(grad.data()[i], numeric) < 1e-4);
      }
    }
  }

  TEST_CASE("train_dmae_block lowers the loss and logs epochs+1 entries") {
    const Matrix x = three_pairs();
    const ApResult ap = affinity_propagation(pairwise_dissimilarity(x));
    Matrix theta = init_block_from_ap(x, ap);
    const Matrix initial = theta;

    DmaeConfig cfg;
    cfg.alpha = 100.0;
    cfg.lr = 1e-3;
    cfg.epochs = 100;
    const DmaeTrainLog log = train_dmae_block(x, theta, cfg);
    REQUIRE(log.loss.size() == 101);
    CHECK(log.loss.back() <= log.loss.front());
    CHECK(!(theta == initial));

    // Unconstrained centroids: at least one codevector is no data row.
    bool off_data = false;
    for (std::size_t k = 0; k < theta.rows() && !off_data; ++k) {
      bool matches_some_row = false;
      for (std::size_t j = 0; j < x.rows(); ++j) {
        double max_diff = 0.0;
        for (std::size_t d = 0; d < x.cols(); ++d)
          max_diff = std::max(max_diff, std::abs(theta(k, d) - x(j, d)));
        if (max_diff <= 1e-6) matches_some_row = true;
      }
      if (!matches_some_row) off_data = true;
    }
    CHECK(off_data);
  }

  TEST_CASE("train_dmae_block with zero epochs changes nothing") {
    std::mt19937_64 rng(31);
    const Matrix x = testutil::random_rows(rng, 5, 3);
    Matrix theta = testutil::random_rows(rng, 2, 3);
    const Matrix before = theta;
    DmaeConfig cfg;
    cfg.epochs = 0;
    const DmaeTrainLog log = train_dmae_block(x, theta, cfg);
    CHECK(log.loss.size() == 1);
    CHECK(theta == before);
  }

  TEST_CASE("build_codebook stacks per-emotion blocks with zero biases") {
    SyntheticSpec spec;
    spec.n_docs = 4;
    spec.doc_len = 5;
    spec.n_emotions = 3;
    spec.words_per_emotion = 8;
    spec.dim = 6;
    const SyntheticData data = generate_synthetic_corpus(spec);

    CodebookConfig cc;
    cc.dmae.epochs = 5;
    cc.dmae.alpha = 50.0;
    const CodebookBuildResult result = build_codebook(data.lexicon, data.table, cc);
    const Codebook& cb = result.codebook;
    REQUIRE(cb.blocks.size() == 3);
    CHECK(cb.alpha == 50.0);
    std::size_t total = 0;
    for (std::size_t e = 0; e < 3; ++e) {
      CHECK(cb.blocks[e].emotion == data.lexicon.emotions[e].name);
      CHECK(cb.blocks[e].size == result.ap[e].exemplars.size());
      CHECK(result.dmae[e].loss.size() == 6);
      CHECK(result.words_used[e] == 8);
      total += cb.blocks[e].size;
    }
    CHECK(cb.total() == total);
    CHECK(cb.biases == std::vector<double>(total, 0.0));
    CHECK(cb.block_range(1).first == cb.blocks[0].size);

    // Parallel and serial construction agree exactly.
    CodebookConfig cc4 = cc;
    cc4.threads = 4;
    const CodebookBuildResult par = build_codebook(data.lexicon, data.table, cc4);
    CHECK(par.codebook.codevectors == cb.codevectors);
  }

  TEST_CASE("build_codebook reports missing words and rejects empty coverage") {
    EmbeddingTable table;
    table.dim = 2;
    table.entries["glee"] = {1.0, 0.0};
    Lexicon lex;
    lex.emotions.push_back({"joy", {"glee", "zeal"}});
    std::vector<std::string> warnings;
    const CodebookBuildResult result = build_codebook(lex, table, {}, &warnings);
    CHECK(result.words_used[0] == 1);
    CHECK(warnings.size() == 1);

    Lexicon uncovered;
    uncovered.emotions.push_back({"fear", {"dread"}});
    CHECK_THROWS_AS(build_codebook(uncovered, table), DataError);
  }
}
