#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "polyparse/autodiff.hpp"
#include "polyparse/corpus.hpp"

namespace polyparse {

// Character-CNN + two-layer bidirectional LSTM language model settings.
// Defaults are a 1/16-scale version of the large ELMo-style configuration.
struct LmConfig {
  int char_dim = 16;
  std::vector<std::pair<int, int>> filters = {{1, 8}, {2, 8}, {3, 16}, {4, 32}};  // (window, count)
  int max_word_chars = 20;  // including the two boundary symbols
  int lstm_size = 128;
  int projection_size = 32;  // 0 disables the output projection
  bool skip_connections = true;
  double dropout = 0.1;  // between layers, training only

  int batch_size = 32;
  int max_sentence_length = 20;  // unroll window; longer sentences are chunked
  int epochs = 10;
  double learning_rate = 0.2;
  double adagrad_initial_accumulator = 1.0;
  double clip_norm = 5.0;
  int min_count = 1;  // softmax vocabulary threshold
  std::uint64_t seed = 1;

  // Width of the token vector and of each direction's exposed LSTM state.
  int token_dim() const { return projection_size > 0 ? projection_size : lstm_size; }
  int cnn_width() const;
  int max_window() const;

  nlohmann::json to_json() const;
  static LmConfig from_json(const nlohmann::json& j);
};

struct LstmCellParams {
  ad::ParamId w = 0;     // 4H x input   (gate order i, f, c~, o)
  ad::ParamId u = 0;     // 4H x exposed
  ad::ParamId b = 0;     // 4H x 1
  ad::ParamId proj = 0;  // exposed x H, only when has_projection
  bool has_projection = false;
};

struct ConvParams {
  int window = 0;
  ad::ParamId w = 0;  // filters x (char_dim * window)
  ad::ParamId b = 0;
};

enum Direction { kForward = 0, kBackward = 1 };

struct LMParams {
  LmConfig config;
  Vocabulary vocab;
  ad::ParameterSet params;
  std::string id;

  ad::ParamId char_embedding = 0;  // char_dim x chars
  std::vector<ConvParams> convs;
  ad::ParamId cnn_proj_w = 0, cnn_proj_b = 0;
  std::array<std::array<LstmCellParams, 2>, 2> cells{};  // [direction][layer]
  ad::ParamId softmax_w = 0, softmax_b = 0;              // shared by both directions

  // Fresh parameters with seeded initialization.
  static LMParams init(const LmConfig& cfg, Vocabulary vocab, std::uint64_t seed);

  // Every parameter set to zero (used to exercise degenerate cases).
  void zero_all();
  // Dimension of each of the three emitted layers.
  int layer_dim() const { return 2 * config.token_dim(); }

  const Matrix& value(ad::ParamId id) const { return params[id].value; }
};

// Three per-word vectors: char-CNN (duplicated), LSTM layer 1, LSTM layer 2.
struct LayeredEmbedding {
  std::array<Vector, 3> layers;
  bool operator==(const LayeredEmbedding& o) const {
    for (int j = 0; j < 3; ++j)
      if (layers[j].size() != o.layers[j].size() || layers[j] != o.layers[j]) return false;
    return true;
  }
};

struct LstmState {
  ad::Var h;  // exposed (projected) state
  ad::Var c;  // cell state
};

// Char-CNN token vectors for a list of words, one column per word.
ad::Var char_cnn_encode(ad::Tape& tape, const LMParams& lm, const std::vector<std::string>& words);
Vector char_cnn_encode(const LMParams& lm, const std::string& word);

// Plain LSTM cell over a batch of columns, gate order (i, f, c~, o).
LstmState lstm_cell(ad::Var w, ad::Var u, ad::Var b, ad::Var x, ad::Var h_prev, ad::Var c_prev);

// One step of the (projected) LSTM cell over a batch of columns.
LstmState lstm_step(ad::Tape& tape, const LMParams& lm, const LstmCellParams& cell, ad::Var x, ad::Var h_prev,
                    ad::Var c_prev);

// Contextual embeddings for every token of one sentence. Boundary markers
// are prediction targets only: they are neither fed as inputs nor emitted.
std::vector<LayeredEmbedding> bilm_forward(const LMParams& lm, const std::vector<std::string>& tokens);
std::vector<std::vector<LayeredEmbedding>> bilm_forward_batch(const LMParams& lm,
                                                              const std::vector<std::vector<std::string>>& sentences,
                                                              std::size_t chunk = 64);

// Joint forward + backward mean negative log-likelihood of a batch.
struct LmLoss {
  ad::Var mean_nll;
  std::size_t predictions = 0;
};
LmLoss lm_loss(ad::Tape& tape, const LMParams& lm, const std::vector<std::vector<std::string>>& sentences,
               Rng* dropout_rng = nullptr);

struct LanguageCorpus {
  std::string language;
  std::vector<std::vector<std::string>> sentences;
};

struct LmTrainOptions {
  // When set, the corpus must fit this vocabulary.
  const Vocabulary* vocabulary = nullptr;
  std::function<void(int epoch, double mean_loss, const LMParams&)> on_epoch;
};

// Trains one model on one corpus (monolingual) or several (polyglot; each
// batch interleaves languages round-robin).
LMParams train_lm(const std::vector<LanguageCorpus>& corpora, const LmConfig& cfg, const LmTrainOptions& opts = {});

// exp(mean per-prediction NLL), pooled over both directions.
double perplexity(const LMParams& lm, const std::vector<std::vector<std::string>>& sentences);
double perplexity(const LMParams& lm, const std::vector<std::string>& token_stream);

// Splits sentences longer than `max_len` into consecutive chunks.
std::vector<std::vector<std::string>> chunk_sentences(const std::vector<std::vector<std::string>>& sentences,
                                                      std::size_t max_len);

void save_lm(const std::string& path, const LMParams& lm);
LMParams load_lm(const std::string& path);

// Content hash of parameters, config and vocabulary.
std::string fingerprint(const LMParams& lm);

}  // namespace polyparse
