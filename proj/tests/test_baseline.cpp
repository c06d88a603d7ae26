#include <doctest.h>

#include <cmath>

#include "deepbose/baseline.hpp"
#include "helpers.hpp"

using namespace deepbose;

namespace {

Codebook axis_codebook(std::size_t k, double alpha = 1e4) {
  Codebook cb;
  cb.alpha = alpha;
  cb.codevectors = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) cb.codevectors(i, i) = 1.0;
  cb.biases.assign(k, 0.0);
  cb.blocks = {{"all", k}};
  return cb;
}

EmbeddedDoc doc_from_rows(Matrix rows) {
  EmbeddedDoc doc;
  doc.kept_tokens.assign(rows.rows(), "t");
  doc.matrix = std::move(rows);
  return doc;
}

}  // namespace

TEST_SUITE("baseline") {
  TEST_CASE("hard_assign picks the nearest codevector, lowest index on ties") {
    const Codebook cb = axis_codebook(6);
    Matrix rows(2, 6);
    rows(0, 5) = 3.0;                    // exactly along codevector 5
    rows(1, 0) = 1.0;
    rows(1, 1) = 1.0;                    // equidistant between 0 and 1
    const LabelSequence seq = hard_assign(doc_from_rows(rows), cb);
    CHECK(seq == LabelSequence{5, 0});

    CHECK_THROWS_AS(hard_assign(doc_from_rows(Matrix(0, 6)), cb), DataError);
    CHECK_THROWS_AS(hard_assign(doc_from_rows(Matrix(1, 3)), cb), ConfigError);
  }

  TEST_CASE("hard_assign agrees with the soft argmax at extreme temperature") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
      Codebook cb = axis_codebook(5);
      cb.codevectors = testutil::random_rows(rng, 5, 7);
      cb.alpha = 1e4;
      Matrix rows = testutil::random_rows(rng, 8, 7);
      // Regenerate any row whose two nearest codevectors are close.
      for (std::size_t j = 0; j < rows.rows(); ++j) {
        for (int attempt = 0; attempt < 200; ++attempt) {
          std::vector<double> d(5);
          for (std::size_t k = 0; k < 5; ++k)
            d[k] = cosine_dissimilarity(rows.row(j), cb.codevectors.row(k));
          std::sort(d.begin(), d.end());
          if (d[1] - d[0] >= 1e-2) break;
          const Matrix fresh = testutil::random_rows(rng, 1, 7);
          std::copy(fresh.row(0).begin(), fresh.row(0).end(), rows.row(j).begin());
        }
      }
      const EmbeddedDoc doc = doc_from_rows(rows);
      const LabelSequence hard = hard_assign(doc, cb);
      const SoftAssignment soft = dm_encode(doc.matrix, cb);
      for (std::size_t j = 0; j < rows.rows(); ++j) {
        std::size_t argmax = 0;
        for (std::size_t k = 1; k < 5; ++k)
          if (soft.s(j, k) > soft.s(j, argmax)) argmax = k;
        CHECK(argmax == hard[j]);
      }
    }
  }

  TEST_CASE("ngram_counts matches hand counts") {
    const SparseCounts uni = ngram_counts({2, 2, 0}, 1, 3);
    CHECK(uni.space == 3);
    CHECK(uni.counts == std::map<std::size_t, std::size_t>{{2, 2}, {0, 1}});

    const SparseCounts bi = ngram_counts({2, 2, 0}, 2, 3);
    CHECK(bi.space == 9);
    CHECK(bi.counts == std::map<std::size_t, std::size_t>{{2 * 3 + 2, 1}, {2 * 3 + 0, 1}});

    CHECK_THROWS_AS(ngram_counts({0}, 2, 3), DataError);
    CHECK_THROWS_AS(ngram_counts({5}, 1, 3), ConfigError);
    CHECK_THROWS_AS(ngram_counts({0}, 3, 3), ConfigError);
  }

  TEST_CASE("ngram totals equal the sequence length identities") {
    std::mt19937_64 rng(43);
    LabelSequence seq(50);
    for (auto& s : seq) s = rng() % 4;
    std::size_t uni_total = 0, bi_total = 0;
    for (const auto& [f, c] : ngram_counts(seq, 1, 4).counts) uni_total += c;
    for (const auto& [f, c] : ngram_counts(seq, 2, 4).counts) bi_total += c;
    CHECK(uni_total == 50);
    CHECK(bi_total == 49);
  }

  TEST_CASE("compute_idf uses the smoothed formula") {
    std::vector<SparseCounts> docs(10);
    for (auto& d : docs) {
      d.space = 3;
      d.counts[0] = 1;  // feature 0 in every document
    }
    docs[0].counts[1] = 4;  // feature 1 in one document
    const IdfVector idf = compute_idf(docs, 3);
    CHECK(idf.n_docs == 10);
    CHECK(idf.values[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(idf.values[1] == doctest::Approx(std::log(11.0 / 2.0) + 1.0).epsilon(1e-15));
    CHECK(idf.values[2] == doctest::Approx(std::log(11.0) + 1.0).epsilon(1e-15));
    for (double v : idf.values) CHECK(v > 0.0);

    SparseCounts single;
    single.space = 1;
    single.counts[0] = 2;
    const IdfVector one = compute_idf({single}, 1);
    CHECK(one.values[0] == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(compute_idf({}, 3), DataError);
  }

  TEST_CASE("tfidf_vector applies sublinear scaling") {
    SparseCounts counts;
    counts.space = 4;
    counts.counts[1] = 1;
    counts.counts[2] = static_cast<std::size_t>(std::round(std::exp(1.0)));  // not used below
    IdfVector idf;
    idf.values = {1.0, 1.5, 2.0, 3.0};
    idf.n_docs = 1;

    const std::vector<double> v = tfidf_vector(counts, idf);
    CHECK(v[0] == 0.0);                                   // absent -> 0
    CHECK(v[1] == doctest::Approx(1.5).epsilon(1e-15));   // count 1 -> idf
    CHECK(v[3] == 0.0);

    SparseCounts e_count;
    e_count.space = 1;
    e_count.counts[0] = 3;
    IdfVector idf2;
    idf2.values = {2.0};
    const std::vector<double> w = tfidf_vector(e_count, idf2);
    CHECK(w[0] == doctest::Approx((std::log(3.0) + 1.0) * 2.0).epsilon(1e-15));

    // Monotone in the count for a fixed idf.
    double prev = -1.0;
    for (std::size_t c = 1; c <= 6; ++c) {
      SparseCounts sc;
      sc.space = 1;
      sc.counts[0] = c;
      const double val = tfidf_vector(sc, idf2)[0];
      CHECK(val > prev);
      prev = val;
    }

    CHECK_THROWS_AS(tfidf_vector(counts, idf2), ConfigError);
  }

  TEST_CASE("baseline_train separates a separable fixture") {
    const std::vector<std::vector<double>> x{{1.0, 0.0}, {0.0, 1.0}};
    const std::vector<int> y{1, 0};
    const LinearClassifier clf = baseline_train(x, y, 1e-4, 500, 0.5, 1);
    CHECK(clf.predict(x[0]) > 0.5);
    CHECK(clf.predict(x[1]) < 0.5);

    const LinearClassifier again = baseline_train(x, y, 1e-4, 500, 0.5, 1);
    CHECK(again.weights == clf.weights);  // deterministic per seed

    CHECK_THROWS_AS(baseline_train(x, {1, 1}, 1e-4, 10, 0.1, 1), DataError);
    CHECK_THROWS_AS(baseline_train({}, {}, 1e-4, 10, 0.1, 1), ConfigError);
  }

  TEST_CASE("strong regularization collapses weights toward the base rate") {
    std::mt19937_64 rng(47);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
      x.push_back({testutil::gauss(rng), testutil::gauss(rng)});
      y.push_back(i < 30 ? 1 : 0);  // base rate 0.75
    }
    const LinearClassifier clf = baseline_train(x, y, 50.0, 2000, 0.01, 2);
    for (double w : clf.weights) CHECK(std::abs(w) < 1e-2);
    CHECK(clf.predict({0.0, 0.0}) == doctest::Approx(0.75).epsilon(0.05));
  }

  TEST_CASE("init_idf_weights composes hard assignment with unigram idf") {
    EmbeddingTable table;
    table.dim = 2;
    table.entries["east"] = {1.0, 0.0};
    table.entries["north"] = {0.0, 1.0};
    const Codebook cb = axis_codebook(2);

    Corpus corpus;
    corpus.documents.push_back({"a", 1, {"east", "north", "east"}});
    corpus.documents.push_back({"b", 0, {"east"}});

    const std::vector<double> w = init_idf_weights(corpus, table, cb);
    REQUIRE(w.size() == 2);
    CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-15));  // present in both docs
    CHECK(w[1] == doctest::Approx(std::log(3.0 / 2.0) + 1.0).epsilon(1e-15));

    // Matches a manual composition through the public pieces.
    std::vector<SparseCounts> per_doc;
    for (const auto& doc : corpus.documents)
      per_doc.push_back(ngram_counts(hard_assign(embed_document(doc, table), cb), 1, 2));
    CHECK(w == compute_idf(per_doc, 2).values);

    CHECK_THROWS_AS(init_idf_weights(Corpus{}, table, cb), DataError);
  }
}
