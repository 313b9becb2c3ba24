#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "polyparse/align.hpp"
#include "polyparse/autodiff.hpp"
#include "polyparse/bilm.hpp"
#include "polyparse/corpus.hpp"

namespace polyparse {

struct ParserConfig {
  int lstm_size = 100;
  int lstm_layers = 3;
  int arc_mlp = 125;
  int label_mlp = 25;
  double input_dropout = 0.3;
  double dropout = 0.3;  // between encoder layers and before the MLPs

  int batch_size = 80;  // even: half source, half target
  int epochs = 80;
  int patience = 50;  // epochs without dev LAS improvement
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double clip_norm = 5.0;
  bool greedy_dev = true;  // per-token argmax for dev evaluation, MST otherwise
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static ParserConfig from_json(const nlohmann::json& j);
};

// Per-sentence input layers, each d x n (one column per token).
struct SentenceFeatures {
  std::vector<Matrix> layers;
};

// Frozen word representations: either a language model (optionally with
// per-language alignment maps into the hub space) or a word-vector table.
// Nothing here is trained by the parser.
struct Embedder {
  std::shared_ptr<const LMParams> lm;
  std::map<std::string, AlignmentMap> maps;  // keyed by sentence language; absent = identity
  std::shared_ptr<const VectorTable> vectors;

  static Embedder from_lm(std::shared_ptr<const LMParams> lm, std::map<std::string, AlignmentMap> maps = {});
  static Embedder from_vectors(std::shared_ptr<const VectorTable> table);

  int dim() const;
  int layer_count() const { return lm ? 3 : 1; }
  std::vector<SentenceFeatures> features(const std::vector<Sentence>& sentences) const;
  nlohmann::json describe() const;
};

struct EncoderCell {
  ad::ParamId w = 0, u = 0, b = 0;
};

struct ParserModel {
  ParserConfig config;
  std::vector<std::string> labels;
  int input_dim = 0;
  int input_layers = 3;
  nlohmann::json embedder;  // description of the binding it was trained with
  ad::ParameterSet params;

  ad::ParamId mix_raw = 0, mix_gamma = 0, root = 0;
  std::vector<std::array<EncoderCell, 2>> encoder;  // [layer][direction]
  ad::ParamId arc_head_w = 0, arc_head_b = 0, arc_dep_w = 0, arc_dep_b = 0;
  ad::ParamId lab_head_w = 0, lab_head_b = 0, lab_dep_w = 0, lab_dep_b = 0;
  ad::ParamId arc_u = 0, arc_bias = 0;
  ad::ParamId lab_u = 0, lab_w = 0, lab_b = 0;

  static ParserModel init(const ParserConfig& cfg, std::vector<std::string> labels, int input_dim, int input_layers,
                          std::uint64_t seed);
  int label_id(const std::string& l) const;  // -1 when unknown
};

// Encoder output for a batch: one column per position, the synthetic root
// first in each sentence.
struct Encoded {
  ad::Var states;             // 2H x positions
  std::vector<int> offsets;   // first (root) column of each sentence
  std::vector<int> lengths;   // tokens per sentence, root excluded
};

ad::Var mix_inputs(ad::Tape& tape, const ParserModel& m, const std::vector<const SentenceFeatures*>& batch);
Encoded encode(ad::Tape& tape, const ParserModel& m, const std::vector<const SentenceFeatures*>& batch,
               Rng* dropout_rng = nullptr);

// s(h, d) = hh_h^T U hd_d + hh_h^T b; rows are heads (root first), columns
// dependents.
ad::Var biaffine_arc(ad::Var head_reprs, ad::Var dep_reprs, ad::Var u, ad::Var b);

struct MlpOutputs {
  ad::Var arc_head, arc_dep, lab_head, lab_dep;  // one column per position
};
MlpOutputs mlp_outputs(ad::Tape& tape, const ParserModel& m, const Encoded& enc);

// (n+1) x n arc scores for sentence `s` of the batch.
ad::Var arc_scores(const ParserModel& m, const Encoded& enc, const MlpOutputs& mlp, std::size_t s);
// Label scores (labels x tokens) for the given head of every token of the batch.
ad::Var label_scores(ad::Tape& tape, const ParserModel& m, const Encoded& enc, const MlpOutputs& mlp,
                     const std::vector<std::vector<int>>& heads);

struct ParseLoss {
  ad::Var mean;
  std::size_t tokens = 0;
};
// Head cross-entropy over candidate heads (self excluded) plus label
// cross-entropy at the gold head, averaged over tokens.
ParseLoss parse_loss(ad::Tape& tape, const ParserModel& m, const std::vector<const SentenceFeatures*>& batch,
                     const std::vector<const Sentence*>& gold, Rng* dropout_rng = nullptr);

// Maximum spanning arborescence over (n+1) x n scores with exactly one
// dependent of the root (Chu-Liu/Edmonds). Returns 1-based heads, 0 = root.
std::vector<int> mst_decode(const Matrix& scores);
// Unconstrained Chu-Liu/Edmonds on a square score matrix w(h, d), node 0 the
// root. Entry 0 of the result is -1.
std::vector<int> chu_liu_edmonds(const Matrix& w);
// Best head per dependent (self excluded); not necessarily a tree.
std::vector<int> greedy_decode(const Matrix& scores);

std::vector<Sentence> parse(const ParserModel& m, const Embedder& embedder, const std::vector<Sentence>& sentences,
                            bool use_mst = true);
std::vector<Sentence> parse_features(const ParserModel& m, const std::vector<Sentence>& sentences,
                                     const std::vector<SentenceFeatures>& features, bool use_mst);

struct AttachmentScores {
  double uas = 0.0;  // percent
  double las = 0.0;
  std::size_t tokens = 0;
};
AttachmentScores evaluate(const std::vector<Sentence>& pred, const std::vector<Sentence>& gold);
AttachmentScores evaluate(const Treebank& pred, const Treebank& gold);

struct ParserTrainOptions {
  std::function<void(int epoch, double train_loss, double dev_las)> on_epoch;
};

struct ParserTrainResult {
  ParserModel model;
  double best_dev_las = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
};

// Sources are pooled; with a nonempty target every batch is half source and
// half target. `dev` drives early stopping.
ParserTrainResult train_parser(const std::vector<Treebank>& sources, const Treebank& target, const Treebank& dev,
                               const Embedder& embedder, const ParserConfig& cfg,
                               const ParserTrainOptions& opts = {});

void save_parser(const std::string& path, const ParserModel& m);
ParserModel load_parser(const std::string& path);

}  // namespace polyparse
