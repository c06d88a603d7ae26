// File formats: codebook and model JSON (round-trip exact floats), history
// and histogram CSVs, sparse feature lines, saliency and metric reports,
// and writers for the synthetic fixture files (.vec / lexicon / corpus).
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "deepbose/baseline.hpp"
#include "deepbose/clustering.hpp"
#include "deepbose/core.hpp"
#include "deepbose/interpret.hpp"
#include "deepbose/model.hpp"
#include "deepbose/text_io.hpp"
#include "deepbose/train.hpp"

namespace deepbose {

inline std::string pooling_name(Pooling p) {
  return p == Pooling::SumTfidf ? "sum_tfidf" : "average";
}

inline Pooling pooling_from_name(const std::string& name) {
  if (name == "sum_tfidf") return Pooling::SumTfidf;
  if (name == "average") return Pooling::Average;
  throw ConfigError("unknown pooling '" + name + "' (expected sum_tfidf or average)");
}

inline std::string activation_name(Activation a) {
  return a == Activation::Relu ? "relu" : "sigmoid";
}

inline Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation '" + name + "' (expected relu or sigmoid)");
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);  // binary: no newline translation
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("malformed JSON: " + path.string());
  return j;
}

inline double finite_number(const nlohmann::json& j, const std::string& what) {
  if (!j.is_number()) throw DataError(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw DataError(what + " must be finite");
  return v;
}

inline std::vector<double> number_array(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw DataError(what + " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(finite_number(e, what + " entry"));
  return out;
}

}  // namespace detail

inline nlohmann::json codebook_to_json(const Codebook& cb) {
  nlohmann::json emotions = nlohmann::json::array();
  std::size_t row = 0;
  for (const auto& block : cb.blocks) {
    nlohmann::json vectors = nlohmann::json::array();
    for (std::size_t r = 0; r < block.size; ++r, ++row) {
      auto span = cb.codevectors.row(row);
      vectors.push_back(std::vector<double>(span.begin(), span.end()));
    }
    emotions.push_back({{"name", block.emotion},
                        {"K_e", block.size},
                        {"codevectors", std::move(vectors)}});
  }
  return {{"alpha", cb.alpha}, {"emotions", std::move(emotions)}, {"biases", cb.biases}};
}

inline Codebook codebook_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("alpha") || !j.contains("emotions") || !j.contains("biases"))
    throw DataError("codebook JSON must contain alpha, emotions, biases");
  Codebook cb;
  cb.alpha = detail::finite_number(j["alpha"], "codebook alpha");
  if (cb.alpha <= 0.0) throw DataError("codebook alpha must be positive");
  if (!j["emotions"].is_array() || j["emotions"].empty())
    throw DataError("codebook needs a non-empty emotions array");

  std::vector<std::vector<double>> rows;
  std::size_t dim = 0;
  for (const auto& e : j["emotions"]) {
    if (!e.is_object() || !e.contains("name") || !e.contains("K_e") || !e.contains("codevectors") ||
        !e["name"].is_string() || !e["codevectors"].is_array())
      throw DataError("codebook emotion entries need name, K_e, codevectors");
    const auto& vectors = e["codevectors"];
    if (!e["K_e"].is_number_unsigned() || e["K_e"].get<std::size_t>() != vectors.size() ||
        vectors.empty())
      throw DataError("codebook emotion '" + e["name"].get<std::string>() +
                      "': K_e must equal the codevector count (>= 1)");
    for (const auto& v : vectors) {
      rows.push_back(detail::number_array(v, "codevector"));
      if (dim == 0) dim = rows.back().size();
      if (rows.back().size() != dim || dim == 0)
        throw DataError("codebook codevectors must share one non-zero dimension");
    }
    cb.blocks.push_back({e["name"].get<std::string>(), vectors.size()});
  }
  cb.biases = detail::number_array(j["biases"], "codebook biases");
  if (cb.biases.size() != rows.size())
    throw DataError("codebook biases length must equal the total codevector count");
  cb.codevectors = Matrix(rows.size(), dim);
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r].begin(), rows[r].end(), cb.codevectors.row(r).begin());
  return cb;
}

inline void save_codebook(const std::filesystem::path& path, const Codebook& cb) {
  detail::write_text_file(path, codebook_to_json(cb).dump(2) + "\n");
}

inline Codebook load_codebook(const std::filesystem::path& path) {
  return codebook_from_json(detail::read_json_file(path));
}

// A trained model plus the fingerprint of the configuration that built it.
struct ModelBundle {
  ModelParams params;
  std::string config_hash;
};

inline nlohmann::json model_to_json(const ModelBundle& bundle) {
  const ModelParams& p = bundle.params;
  nlohmann::json dense = nlohmann::json::array();
  for (const auto& layer : p.dense.layers)
    dense.push_back({{"rows", layer.out_dim()},
                     {"cols", layer.in_dim()},
                     {"weights", layer.weights.data()},
                     {"bias", layer.bias},
                     {"activation", activation_name(layer.activation)}});
  return {{"codebook", codebook_to_json(p.codebook)},
          {"idf_weights", p.idf_weights},
          {"dense", std::move(dense)},
          {"dropout_rate", p.dropout_rate},
          {"pooling", pooling_name(p.pooling)},
          {"config_hash", bundle.config_hash}};
}

inline ModelBundle model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("codebook") || !j.contains("idf_weights") ||
      !j.contains("dense") || !j.contains("dropout_rate") || !j.contains("pooling"))
    throw DataError("model JSON must contain codebook, idf_weights, dense, dropout_rate, pooling");

  ModelBundle bundle;
  ModelParams& p = bundle.params;
  p.codebook = codebook_from_json(j["codebook"]);
  p.idf_weights = detail::number_array(j["idf_weights"], "idf_weights");
  if (p.idf_weights.size() != p.codebook.total())
    throw DataError("idf_weights length must equal the codebook size");
  p.dropout_rate = detail::finite_number(j["dropout_rate"], "dropout_rate");
  if (p.dropout_rate < 0.0 || p.dropout_rate >= 1.0)
    throw DataError("dropout_rate must lie in [0, 1)");
  if (!j["pooling"].is_string()) throw DataError("pooling must be a string");
  try {
    p.pooling = pooling_from_name(j["pooling"].get<std::string>());
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }

  if (!j["dense"].is_array() || j["dense"].empty())
    throw DataError("model needs a non-empty dense layer array");
  std::size_t expect_in = p.codebook.total();
  for (const auto& l : j["dense"]) {
    if (!l.is_object() || !l.contains("rows") || !l.contains("cols") || !l.contains("weights") ||
        !l.contains("bias") || !l.contains("activation") || !l["rows"].is_number_unsigned() ||
        !l["cols"].is_number_unsigned() || !l["activation"].is_string())
      throw DataError("dense layer entries need rows, cols, weights, bias, activation");
    DenseLayer layer;
    const auto rows = l["rows"].get<std::size_t>();
    const auto cols = l["cols"].get<std::size_t>();
    const auto weights = detail::number_array(l["weights"], "dense weights");
    if (rows == 0 || cols == 0 || weights.size() != rows * cols)
      throw DataError("dense layer weights must hold rows*cols entries");
    if (cols != expect_in)
      throw DataError("dense layer input size " + std::to_string(cols) +
                      " does not chain from previous size " + std::to_string(expect_in));
    layer.weights = Matrix(rows, cols);
    layer.weights.data() = weights;
    layer.bias = detail::number_array(l["bias"], "dense bias");
    if (layer.bias.size() != rows) throw DataError("dense bias length must equal rows");
    try {
      layer.activation = activation_from_name(l["activation"].get<std::string>());
    } catch (const ConfigError& e) {
      throw DataError(e.what());
    }
    expect_in = rows;
    p.dense.layers.push_back(std::move(layer));
  }
  if (p.dense.layers.back().out_dim() != 1 ||
      p.dense.layers.back().activation != Activation::Sigmoid)
    throw DataError("model's final dense layer must be a single sigmoid unit");

  if (j.contains("config_hash")) {
    if (!j["config_hash"].is_string()) throw DataError("config_hash must be a string");
    bundle.config_hash = j["config_hash"].get<std::string>();
  }
  return bundle;
}

inline void save_model(const std::filesystem::path& path, const ModelBundle& bundle) {
  detail::write_text_file(path, model_to_json(bundle).dump(2) + "\n");
}

inline ModelBundle load_model(const std::filesystem::path& path) {
  return model_from_json(detail::read_json_file(path));
}

inline void save_history(const std::filesystem::path& path, const TrainHistory& history) {
  std::string text = "epoch,train_loss,val_loss,val_f1\n";
  for (const auto& e : history.epochs)
    text += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
            format_double(e.val_loss) + "," + format_double(e.val_f1) + "\n";
  detail::write_text_file(path, text);
}

inline nlohmann::json metrics_to_json(const MetricReport& r) {
  return {{"f1_positive", r.f1_positive},
          {"accuracy", r.accuracy},
          {"macro_precision", r.macro_precision},
          {"macro_recall", r.macro_recall},
          {"tp", r.tp},
          {"fp", r.fp},
          {"tn", r.tn},
          {"fn", r.fn}};
}

inline void save_metrics(const std::filesystem::path& path, const MetricReport& r) {
  detail::write_text_file(path, metrics_to_json(r).dump(2) + "\n");
}

inline void save_saliency(const std::filesystem::path& path, const SaliencyMap& map) {
  const nlohmann::json j = {{"id", map.id},
                            {"tokens", map.tokens},
                            {"scores", map.scores},
                            {"prediction", map.prediction}};
  detail::write_text_file(path, j.dump(2) + "\n");
}

inline void save_histogram(const std::filesystem::path& path, const EmotionHistogram& hist) {
  std::string text = "index,emotion,mean_weight\n";
  for (std::size_t k = 0; k < hist.mean_weights.size(); ++k)
    text += std::to_string(k) + "," + hist.emotion_names[k] + "," +
            format_double(hist.mean_weights[k]) + "\n";
  detail::write_text_file(path, text);
}

// One document per line: "<id> <label> f:count f:count ..." with features
// in ascending index order.
inline void save_features(const std::filesystem::path& path, const std::vector<std::string>& ids,
                          const std::vector<int>& labels,
                          const std::vector<SparseCounts>& counts) {
  if (ids.size() != labels.size() || ids.size() != counts.size())
    throw ConfigError("feature export needs equal-length ids, labels, counts");
  std::string text;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    text += ids[i] + " " + std::to_string(labels[i]);
    for (const auto& [f, c] : counts[i].counts)
      text += " " + std::to_string(f) + ":" + std::to_string(c);
    text += "\n";
  }
  detail::write_text_file(path, text);
}

// .vec writer; `order` fixes the row order so output is reproducible.
inline void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table,
                            const std::vector<std::string>& order) {
  std::string text = std::to_string(order.size()) + " " + std::to_string(table.dim) + "\n";
  for (const auto& token : order) {
    const auto* vec = table.find(token);
    if (!vec) throw DataError("token '" + token + "' missing from the embedding table");
    text += token;
    for (double v : *vec) text += " " + format_double(v);
    text += "\n";
  }
  detail::write_text_file(path, text);
}

inline void save_lexicon(const std::filesystem::path& path,
                         const std::vector<std::pair<std::string, std::vector<std::string>>>& entries) {
  std::string text;
  for (const auto& [emotion, words] : entries)
    for (const auto& word : words) text += word + "\t" + emotion + "\t1\n";
  detail::write_text_file(path, text);
}

inline void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::string text;
  for (const auto& doc : corpus.documents) {
    nlohmann::json j;
    j["id"] = doc.id;
    if (doc.label)
      j["label"] = *doc.label;
    else
      j["label"] = nullptr;
    // Tokens round-trip through the whitespace tokenizer unchanged.
    std::string joined;
    for (const auto& t : doc.tokens) {
      if (!joined.empty()) joined.push_back(' ');
      joined += t;
    }
    j["posts"] = nlohmann::json::array({joined});
    text += j.dump() + "\n";
  }
  detail::write_text_file(path, text);
}

}  // namespace deepbose
