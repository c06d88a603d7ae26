// Ingestion: word-embedding tables (.vec text format), emotion lexicons
// (word<TAB>emotion<TAB>flag), JSON-lines corpora, tokenization, document
// embedding, and a deterministic synthetic-corpus generator for tests.
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "deepbose/core.hpp"

namespace deepbose {

struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> entries;

  const std::vector<double>* find(const std::string& token) const {
    auto it = entries.find(token);
    return it == entries.end() ? nullptr : &it->second;
  }
};

struct Lexicon {
  struct Emotion {
    std::string name;
    std::vector<std::string> words;  // sorted, unique, non-empty
  };
  std::vector<Emotion> emotions;

  std::size_t size() const { return emotions.size(); }
};

struct Document {
  std::string id;
  std::optional<int> label;  // 1 = positive class, 0 = negative class
  std::vector<std::string> tokens;
};

struct Corpus {
  std::vector<Document> documents;

  std::size_t size() const { return documents.size(); }
};

struct EmbeddedDoc {
  Matrix matrix;                    // one row per kept in-vocabulary token
  std::vector<std::string> kept_tokens;
  std::size_t oov_count = 0;
};

// Lowercases and splits on maximal runs of non-alphanumeric bytes (ASCII
// rule; multi-byte characters act as separators).
inline std::vector<std::string> tokenize(std::string_view raw) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : raw) {
    const bool digit = ch >= '0' && ch <= '9';
    const bool lower = ch >= 'a' && ch <= 'z';
    const bool upper = ch >= 'A' && ch <= 'Z';
    if (digit || lower) {
      cur.push_back(ch);
    } else if (upper) {
      cur.push_back(static_cast<char>(ch - 'A' + 'a'));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace detail {

inline void warn(std::vector<std::string>* sink, std::string message) {
  if (sink) sink->push_back(std::move(message));
}

inline bool is_zero_vector(const std::vector<double>& v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

}  // namespace detail

// Text vector format: header "<count> <dim>", then one "token v1 .. vdim"
// row per line. Duplicate tokens: last wins with a warning. All-zero rows
// are rejected with a warning (they are unusable under cosine dissimilarity).
inline EmbeddingTable load_embeddings(const std::filesystem::path& path,
                                      std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError("embeddings file is empty: " + path.string());

  std::istringstream header(line);
  long long count = 0, dim = 0;
  std::string extra;
  if (!(header >> count >> dim) || (header >> extra) || count < 0 || dim <= 0)
    throw DataError("malformed embeddings header (expected \"<count> <dim>\"): " + path.string());

  EmbeddingTable table;
  table.dim = static_cast<std::size_t>(dim);
  table.entries.reserve(static_cast<std::size_t>(count));

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string token;
    row >> token;
    std::vector<double> vec(table.dim);
    for (std::size_t d = 0; d < table.dim; ++d) {
      if (!(row >> vec[d]))
        throw DataError("embedding row arity mismatch at line " + std::to_string(line_no) +
                        " for token '" + token + "' (expected " + std::to_string(table.dim) +
                        " values)");
    }
    double trailing;
    if (row >> trailing)
      throw DataError("embedding row arity mismatch at line " + std::to_string(line_no) +
                      " for token '" + token + "' (more than " + std::to_string(table.dim) +
                      " values)");
    if (detail::is_zero_vector(vec)) {
      detail::warn(warnings, "zero vector for token '" + token + "' rejected (line " +
                                 std::to_string(line_no) + ")");
      continue;
    }
    if (table.entries.count(token))
      detail::warn(warnings, "duplicate token '" + token + "' at line " + std::to_string(line_no) +
                                 "; last occurrence wins");
    table.entries[token] = std::move(vec);
  }
  return table;
}

// Tab-separated "word<TAB>emotion<TAB>flag" lines, flag in {0,1}. Emotions
// are ordered by first appearance; emotions with no flagged words are
// dropped (a lexicon entry must carry at least one word).
inline Lexicon load_lexicon(const std::filesystem::path& path,
                            std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file: " + path.string());

  std::vector<std::string> order;
  std::unordered_map<std::string, std::set<std::string>> words;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos)
      throw DataError("malformed lexicon line " + std::to_string(line_no) +
                      " (expected word<TAB>emotion<TAB>flag)");
    const std::string word = line.substr(0, tab1);
    const std::string emotion = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string flag = line.substr(tab2 + 1);
    if (word.empty() || emotion.empty() || (flag != "0" && flag != "1"))
      throw DataError("malformed lexicon line " + std::to_string(line_no) +
                      " (flag must be 0 or 1)");
    if (!words.count(emotion)) {
      order.push_back(emotion);
      words[emotion];
    }
    if (flag == "1") words[emotion].insert(word);
  }

  Lexicon lex;
  for (const auto& name : order) {
    const auto& set = words[name];
    if (set.empty()) {
      detail::warn(warnings, "emotion '" + name + "' has no flagged words; dropped");
      continue;
    }
    lex.emotions.push_back({name, {set.begin(), set.end()}});
  }
  if (lex.emotions.empty())
    throw DataError("lexicon contains zero emotions with flagged words: " + path.string());
  return lex;
}

// JSON-lines, one user per line: {"id": str, "label": 0|1|null, "posts":
// [str, ...]}. Posts are concatenated in order into a single token
// sequence; users with no tokens are dropped with a warning.
inline Corpus load_corpus(const std::filesystem::path& path,
                          std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path.string());

  Corpus corpus;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw DataError("malformed JSON at corpus line " + std::to_string(line_no));
    if (!j.contains("id") || !j["id"].is_string() || !j.contains("posts") || !j["posts"].is_array())
      throw DataError("corpus line " + std::to_string(line_no) +
                      " missing string \"id\" or array \"posts\"");

    Document doc;
    doc.id = j["id"].get<std::string>();
    if (!seen_ids.insert(doc.id).second)
      throw DataError("duplicate document id '" + doc.id + "' at corpus line " +
                      std::to_string(line_no));

    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_number_integer())
        throw DataError("corpus line " + std::to_string(line_no) + " label must be 0, 1 or null");
      const long long v = j["label"].get<long long>();
      if (v != 0 && v != 1)
        throw DataError("corpus line " + std::to_string(line_no) + " label must be 0, 1 or null");
      doc.label = static_cast<int>(v);
    }

    std::string joined;
    for (const auto& post : j["posts"]) {
      if (!post.is_string())
        throw DataError("corpus line " + std::to_string(line_no) + " posts must be strings");
      if (!joined.empty()) joined.push_back(' ');
      joined += post.get<std::string>();
    }
    doc.tokens = tokenize(joined);
    if (doc.tokens.empty()) {
      detail::warn(warnings, "document '" + doc.id + "' has no tokens after tokenization; dropped");
      continue;
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

// Looks up each token, skipping out-of-vocabulary ones. Keeps at most
// max_tokens rows (prefix of the document). Throws a distinct error when
// every token is out of vocabulary.
inline EmbeddedDoc embed_document(const Document& doc, const EmbeddingTable& table,
                                  std::size_t max_tokens = 20000) {
  if (table.entries.empty()) throw DataError("embedding table is empty");

  EmbeddedDoc out;
  std::vector<const std::vector<double>*> rows;
  for (const auto& token : doc.tokens) {
    const auto* vec = table.find(token);
    if (!vec) {
      ++out.oov_count;
      continue;
    }
    if (rows.size() >= max_tokens) break;
    rows.push_back(vec);
    out.kept_tokens.push_back(token);
  }
  if (rows.empty())
    throw DataError("document '" + doc.id + "' is empty after OOV filtering");

  out.matrix = Matrix(rows.size(), table.dim);
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r]->begin(), rows[r]->end(), out.matrix.row(r).begin());
  return out;
}

struct SyntheticSpec {
  int n_docs = 100;
  int doc_len = 50;
  int n_emotions = 4;
  int words_per_emotion = 20;
  int dim = 8;
  double class_skew = 0.8;   // in (0, 1]; 1 = fully disjoint class vocabularies
  std::uint64_t seed = 7;
};

struct SyntheticData {
  Corpus corpus;
  EmbeddingTable table;
  Lexicon lexicon;
  // Emotion order as written, so files regenerate byte-identically.
  std::vector<std::pair<std::string, std::vector<std::string>>> word_order;
  std::vector<std::string> negative_emotions;  // the label-1-tilted subset
};

// Deterministic fixture generator. Emotion anchors are unit vectors with
// pairwise cosine dissimilarity >= 0.5; each emotion's words are noisy
// copies of its anchor. Label-1 documents tilt token draws toward the
// "negative" emotion subset (first max(1, E/3) emotions) by class_skew,
// label-0 documents tilt away; labels alternate so any even prefix is
// balanced.
inline SyntheticData generate_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.n_docs <= 0 || spec.doc_len <= 0 || spec.n_emotions <= 0 ||
      spec.words_per_emotion <= 0 || spec.dim <= 0)
    throw ConfigError("synthetic corpus sizes must be positive");
  if (!(spec.class_skew > 0.0) || spec.class_skew > 1.0)
    throw ConfigError("class_skew must lie in (0, 1]");

  static const char* kNames[] = {"sadness", "fear",  "anger",        "disgust",
                                 "joy",     "trust", "anticipation", "surprise"};
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t E = static_cast<std::size_t>(spec.n_emotions);
  const std::size_t dim = static_cast<std::size_t>(spec.dim);

  // Anchors by rejection sampling; bounded retries so impossible geometries
  // (too many anchors for the dimension) fail loudly.
  std::vector<std::vector<double>> anchors;
  for (std::size_t e = 0; e < E; ++e) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      std::vector<double> v(dim);
      for (auto& x : v) x = gauss(rng);
      const double n = l2_norm(v);
      if (n == 0.0) continue;
      for (auto& x : v) x /= n;
      bool ok = true;
      for (const auto& a : anchors)
        if (dot(a, v) > 0.5) {  // dissimilarity < 0.5
          ok = false;
          break;
        }
      if (ok) {
        anchors.push_back(std::move(v));
        placed = true;
      }
    }
    if (!placed)
      throw DataError("anchor separation failed after bounded retries (dim too small for " +
                      std::to_string(spec.n_emotions) + " emotions)");
  }

  SyntheticData out;
  out.table.dim = dim;
  std::vector<std::vector<std::string>> emotion_words(E);
  for (std::size_t e = 0; e < E; ++e) {
    std::string name = kNames[e % 8];
    if (e >= 8) name += std::to_string(e / 8);
    std::vector<std::string> words;
    for (int w = 0; w < spec.words_per_emotion; ++w) {
      std::string token = "e" + std::to_string(e) + "w" + std::to_string(w);
      std::vector<double> vec(dim);
      for (std::size_t d = 0; d < dim; ++d) vec[d] = anchors[e][d] + 0.1 * gauss(rng);
      const double n = l2_norm(vec);
      for (auto& x : vec) x /= n;
      out.table.entries[token] = vec;
      words.push_back(token);
    }
    emotion_words[e] = words;
    out.word_order.emplace_back(name, words);
    std::sort(words.begin(), words.end());
    out.lexicon.emotions.push_back({name, std::move(words)});
  }

  const std::size_t n_negative = std::max<std::size_t>(1, E / 3);
  for (std::size_t e = 0; e < n_negative; ++e)
    out.negative_emotions.push_back(out.lexicon.emotions[e].name);

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_emotion(0, E - 1);
  std::uniform_int_distribution<std::size_t> neg_emotion(0, n_negative - 1);
  const bool has_positive_pool = n_negative < E;
  std::uniform_int_distribution<std::size_t> pos_emotion(n_negative,
                                                         has_positive_pool ? E - 1 : n_negative);
  std::uniform_int_distribution<std::size_t> any_word(
      0, static_cast<std::size_t>(spec.words_per_emotion) - 1);

  for (int i = 0; i < spec.n_docs; ++i) {
    Document doc;
    doc.id = "u" + std::to_string(i);
    doc.label = i % 2;
    for (int t = 0; t < spec.doc_len; ++t) {
      std::size_t e;
      if (coin(rng) < spec.class_skew) {
        if (*doc.label == 1)
          e = neg_emotion(rng);
        else
          e = has_positive_pool ? pos_emotion(rng) : any_emotion(rng);
      } else {
        e = any_emotion(rng);
      }
      doc.tokens.push_back(emotion_words[e][any_word(rng)]);
    }
    out.corpus.documents.push_back(std::move(doc));
  }
  return out;
}

}  // namespace deepbose
