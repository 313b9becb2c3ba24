#include "polyparse/parser.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "polyparse/checkpoint.hpp"
#include "polyparse/error.hpp"
#include "polyparse/optim.hpp"
#include "polyparse/scalar_mix.hpp"

namespace polyparse {

using ad::Tape;
using ad::Var;

// --- config ----------------------------------------------------------------------

nlohmann::json ParserConfig::to_json() const {
  return {{"lstm_size", lstm_size},       {"lstm_layers", lstm_layers},
          {"arc_mlp", arc_mlp},           {"label_mlp", label_mlp},
          {"input_dropout", input_dropout}, {"dropout", dropout},
          {"batch_size", batch_size},     {"epochs", epochs},
          {"patience", patience},         {"learning_rate", learning_rate},
          {"beta1", beta1},               {"beta2", beta2},
          {"clip_norm", clip_norm},       {"greedy_dev", greedy_dev},
          {"seed", seed}};
}

ParserConfig ParserConfig::from_json(const nlohmann::json& j) {
  ParserConfig c;
  const nlohmann::json known = c.to_json();
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw ConfigError("unknown key '" + k + "'");
  c.lstm_size = j.value("lstm_size", c.lstm_size);
  c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
  c.arc_mlp = j.value("arc_mlp", c.arc_mlp);
  c.label_mlp = j.value("label_mlp", c.label_mlp);
  c.input_dropout = j.value("input_dropout", c.input_dropout);
  c.dropout = j.value("dropout", c.dropout);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.greedy_dev = j.value("greedy_dev", c.greedy_dev);
  c.seed = j.value("seed", c.seed);
  if (c.lstm_size <= 0 || c.lstm_layers <= 0 || c.arc_mlp <= 0 || c.label_mlp <= 0 || c.epochs < 0 ||
      c.patience < 1 || c.learning_rate <= 0.0 || c.input_dropout < 0.0 || c.input_dropout >= 1.0 ||
      c.dropout < 0.0 || c.dropout >= 1.0)
    throw PreconditionError("invalid parser configuration");
  if (c.batch_size < 2 || c.batch_size % 2 != 0)
    throw PreconditionError("parser batch_size must be even and >= 2, got " + std::to_string(c.batch_size));
  return c;
}

// --- embedder --------------------------------------------------------------------

Embedder Embedder::from_lm(std::shared_ptr<const LMParams> lm, std::map<std::string, AlignmentMap> maps) {
  if (!lm) throw PreconditionError("embedder: null language model");
  const int d = lm->layer_dim();
  for (const auto& [lang, map] : maps)
    for (int j = 0; j < 3; ++j)
      if (map.w[j].rows() != d || map.w[j].cols() != d)
        throw PreconditionError("embedder: alignment map for '" + lang + "' does not match the LM dimension");
  Embedder e;
  e.lm = std::move(lm);
  e.maps = std::move(maps);
  return e;
}

Embedder Embedder::from_vectors(std::shared_ptr<const VectorTable> table) {
  if (!table || table->dim <= 0) throw PreconditionError("embedder: empty vector table");
  Embedder e;
  e.vectors = std::move(table);
  return e;
}

int Embedder::dim() const { return lm ? lm->layer_dim() : vectors->dim; }

std::vector<SentenceFeatures> Embedder::features(const std::vector<Sentence>& sentences) const {
  std::vector<SentenceFeatures> out(sentences.size());
  if (vectors) {
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const auto& toks = sentences[i].tokens;
      Matrix m = Matrix::Zero(vectors->dim, static_cast<Eigen::Index>(toks.size()));
      for (std::size_t t = 0; t < toks.size(); ++t)
        if (const Vector* v = vectors->find(toks[t])) m.col(static_cast<Eigen::Index>(t)) = *v;
      out[i].layers = {std::move(m)};
    }
    return out;
  }
  std::vector<std::vector<std::string>> toks;
  for (const auto& s : sentences) toks.push_back(s.tokens);
  const auto emb = bilm_forward_batch(*lm, toks);
  const int d = lm->layer_dim();
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto it = maps.find(sentences[i].language);
    const AlignmentMap* map = it == maps.end() ? nullptr : &it->second;
    const auto n = static_cast<Eigen::Index>(toks[i].size());
    out[i].layers.assign(3, Matrix(d, n));
    for (Eigen::Index t = 0; t < n; ++t) {
      const LayeredEmbedding& e = emb[i][static_cast<std::size_t>(t)];
      for (int j = 0; j < 3; ++j) out[i].layers[j].col(t) = map ? Vector(map->w[j] * e.layers[j]) : e.layers[j];
    }
  }
  return out;
}

nlohmann::json Embedder::describe() const {
  if (vectors) return {{"kind", "vectors"}, {"dim", vectors->dim}, {"words", vectors->size()}};
  nlohmann::json mapped = nlohmann::json::array();
  for (const auto& [lang, m] : maps) mapped.push_back(lang);
  return {{"kind", "lm"}, {"lm_id", lm->id}, {"dim", dim()}, {"mapped_languages", mapped}};
}

// --- model -----------------------------------------------------------------------

ParserModel ParserModel::init(const ParserConfig& cfg, std::vector<std::string> labels, int input_dim,
                              int input_layers, std::uint64_t seed) {
  if (labels.empty()) throw PreconditionError("parser: empty label inventory");
  if (input_dim <= 0 || (input_layers != 1 && input_layers != 3))
    throw PreconditionError("parser: bad input shape");
  ParserModel m;
  m.config = cfg;
  m.labels = std::move(labels);
  m.input_dim = input_dim;
  m.input_layers = input_layers;
  Rng rng(seed);
  auto glorot = [&](int rows, int cols) { return rng.uniform_matrix(rows, cols, std::sqrt(6.0 / (rows + cols))); };
  auto& ps = m.params;
  const int h = cfg.lstm_size;

  m.mix_raw = ps.add("mix.raw", Matrix::Zero(3, 1));
  m.mix_gamma = ps.add("mix.gamma", Matrix::Ones(1, 1));
  m.root = ps.add("root", rng.normal_matrix(input_dim, 1, 0.1));
  int in = input_dim;
  for (int l = 0; l < cfg.lstm_layers; ++l) {
    std::array<EncoderCell, 2> cells;
    for (int dir = 0; dir < 2; ++dir) {
      const std::string base = "enc.l" + std::to_string(l + 1) + (dir == 0 ? ".fwd" : ".bwd");
      const double s = 1.0 / std::sqrt(static_cast<double>(h));
      cells[dir].w = ps.add(base + ".w", rng.uniform_matrix(4 * h, in, s));
      cells[dir].u = ps.add(base + ".u", rng.uniform_matrix(4 * h, h, s));
      Matrix b = Matrix::Zero(4 * h, 1);
      b.middleRows(h, h).setOnes();
      cells[dir].b = ps.add(base + ".b", b);
    }
    m.encoder.push_back(cells);
    in = 2 * h;
  }
  const int a = cfg.arc_mlp, lm = cfg.label_mlp, nl = static_cast<int>(m.labels.size());
  m.arc_head_w = ps.add("mlp.arc_head.w", glorot(a, 2 * h));
  m.arc_head_b = ps.add("mlp.arc_head.b", Matrix::Zero(a, 1));
  m.arc_dep_w = ps.add("mlp.arc_dep.w", glorot(a, 2 * h));
  m.arc_dep_b = ps.add("mlp.arc_dep.b", Matrix::Zero(a, 1));
  m.lab_head_w = ps.add("mlp.lab_head.w", glorot(lm, 2 * h));
  m.lab_head_b = ps.add("mlp.lab_head.b", Matrix::Zero(lm, 1));
  m.lab_dep_w = ps.add("mlp.lab_dep.w", glorot(lm, 2 * h));
  m.lab_dep_b = ps.add("mlp.lab_dep.b", Matrix::Zero(lm, 1));
  m.arc_u = ps.add("biaffine.arc.u", Matrix::Zero(a, a));
  m.arc_bias = ps.add("biaffine.arc.b", Matrix::Zero(a, 1));
  m.lab_u = ps.add("biaffine.label.u", Matrix::Zero(nl, lm * lm));
  m.lab_w = ps.add("biaffine.label.w", glorot(nl, 2 * lm));
  m.lab_b = ps.add("biaffine.label.b", Matrix::Zero(nl, 1));
  return m;
}

int ParserModel::label_id(const std::string& l) const {
  auto it = std::find(labels.begin(), labels.end(), l);
  return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

// --- forward ---------------------------------------------------------------------

namespace {

Matrix dropout_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double p) {
  Matrix mask(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = rng.bernoulli(p) ? 0.0 : keep;
  return mask;
}

Var maybe_dropout(Tape& tape, Var x, Rng* rng, double p) {
  if (!rng || p <= 0.0) return x;
  return mul(x, tape.constant(dropout_mask(*rng, x.rows(), x.cols(), p)));
}

// One bidirectional layer over left-aligned sequences; the backward
// direction reads each sentence reversed so padding only trails.
Var bilstm_layer(Tape& tape, const ParserModel& m, const std::array<EncoderCell, 2>& cells, Var in,
                 const std::vector<int>& offsets, const std::vector<int>& lengths) {
  const std::size_t b = offsets.size();
  int steps = 0;
  for (int len : lengths) steps = std::max(steps, len + 1);
  const Eigen::Index h = m.config.lstm_size;
  std::array<Var, 2> all;
  for (int dir = 0; dir < 2; ++dir) {
    Var w = tape.param(m.params[cells[dir].w]);
    Var u = tape.param(m.params[cells[dir].u]);
    Var bias = tape.param(m.params[cells[dir].b]);
    LstmState st{tape.constant(Matrix::Zero(h, static_cast<Eigen::Index>(b))),
                 tape.constant(Matrix::Zero(h, static_cast<Eigen::Index>(b)))};
    std::vector<Var> hs;
    for (int t = 0; t < steps; ++t) {
      std::vector<int> idx(b);
      for (std::size_t s = 0; s < b; ++s) {
        const int m_s = lengths[s] + 1;
        idx[s] = offsets[s] + (t < m_s ? (dir == 0 ? t : m_s - 1 - t) : 0);
      }
      st = lstm_cell(w, u, bias, gather_cols(in, idx), st.h, st.c);
      hs.push_back(st.h);
    }
    Var stacked = hs.size() == 1 ? hs[0] : concat_cols(hs);
    std::vector<int> back;
    for (std::size_t s = 0; s < b; ++s) {
      const int m_s = lengths[s] + 1;
      for (int q = 0; q < m_s; ++q)
        back.push_back((dir == 0 ? q : m_s - 1 - q) * static_cast<int>(b) + static_cast<int>(s));
    }
    all[dir] = gather_cols(stacked, back);
  }
  return ad::concat_rows({all[0], all[1]});
}

Var affine(Tape& tape, const ParserModel& m, ad::ParamId w, ad::ParamId b, Var x) {
  return add_bias(matmul(tape.param(m.params[w]), x), tape.param(m.params[b]));
}

}  // namespace

Var mix_inputs(Tape& tape, const ParserModel& m, const std::vector<const SentenceFeatures*>& batch) {
  if (batch.empty()) throw PreconditionError("parser: empty batch");
  const int layers = m.input_layers;
  std::vector<Matrix> stacked(static_cast<std::size_t>(layers));
  Eigen::Index total = 0;
  for (const SentenceFeatures* f : batch) {
    if (static_cast<int>(f->layers.size()) != layers) throw PreconditionError("parser: feature layer count mismatch");
    if (f->layers[0].cols() == 0) throw PreconditionError("parser: empty sentence");
    for (const auto& l : f->layers)
      if (l.rows() != m.input_dim || l.cols() != f->layers[0].cols())
        throw PreconditionError("parser: feature dimension mismatch");
    total += f->layers[0].cols();
  }
  for (int j = 0; j < layers; ++j) {
    Matrix& s = stacked[static_cast<std::size_t>(j)];
    s.resize(m.input_dim, total);
    Eigen::Index col = 0;
    for (const SentenceFeatures* f : batch) {
      s.middleCols(col, f->layers[j].cols()) = f->layers[j];
      col += f->layers[j].cols();
    }
  }
  if (layers == 1) return tape.constant(std::move(stacked[0]));
  return scalar_mix(tape.param(m.params[m.mix_raw]), tape.param(m.params[m.mix_gamma]),
                    {tape.constant(std::move(stacked[0])), tape.constant(std::move(stacked[1])),
                     tape.constant(std::move(stacked[2]))});
}

Encoded encode(Tape& tape, const ParserModel& m, const std::vector<const SentenceFeatures*>& batch, Rng* dropout_rng) {
  Var words = mix_inputs(tape, m, batch);
  Encoded enc;
  std::vector<int> idx;
  int token = 0, pos = 0;
  for (const SentenceFeatures* f : batch) {
    const int n = static_cast<int>(f->layers[0].cols());
    enc.offsets.push_back(pos);
    enc.lengths.push_back(n);
    idx.push_back(0);
    for (int t = 0; t < n; ++t) idx.push_back(1 + token + t);
    token += n;
    pos += n + 1;
  }
  Var x = ad::gather_cols(ad::concat_cols({tape.param(m.params[m.root]), words}), idx);
  x = maybe_dropout(tape, x, dropout_rng, m.config.input_dropout);
  for (std::size_t l = 0; l < m.encoder.size(); ++l) {
    x = bilstm_layer(tape, m, m.encoder[l], x, enc.offsets, enc.lengths);
    x = maybe_dropout(tape, x, dropout_rng, m.config.dropout);
  }
  enc.states = x;
  return enc;
}

Var biaffine_arc(Var head_reprs, Var dep_reprs, Var u, Var b) {
  Var ht = transpose(head_reprs);
  return add_bias(matmul(ht, matmul(u, dep_reprs)), matmul(ht, b));
}

MlpOutputs mlp_outputs(Tape& tape, const ParserModel& m, const Encoded& enc) {
  MlpOutputs o;
  o.arc_head = relu(affine(tape, m, m.arc_head_w, m.arc_head_b, enc.states));
  o.arc_dep = relu(affine(tape, m, m.arc_dep_w, m.arc_dep_b, enc.states));
  o.lab_head = relu(affine(tape, m, m.lab_head_w, m.lab_head_b, enc.states));
  o.lab_dep = relu(affine(tape, m, m.lab_dep_w, m.lab_dep_b, enc.states));
  return o;
}

Var arc_scores(const ParserModel& m, const Encoded& enc, const MlpOutputs& mlp, std::size_t s) {
  Tape& tape = *enc.states.tape;
  const int off = enc.offsets[s], n = enc.lengths[s];
  Var hh = slice_cols(mlp.arc_head, off, n + 1);
  Var hd = slice_cols(mlp.arc_dep, off + 1, n);
  return biaffine_arc(hh, hd, tape.param(m.params[m.arc_u]), tape.param(m.params[m.arc_bias]));
}

Var label_scores(Tape& tape, const ParserModel& m, const Encoded& enc, const MlpOutputs& mlp,
                 const std::vector<std::vector<int>>& heads) {
  std::vector<int> hidx, didx;
  for (std::size_t s = 0; s < heads.size(); ++s) {
    for (std::size_t i = 0; i < heads[s].size(); ++i) {
      hidx.push_back(enc.offsets[s] + heads[s][i]);
      didx.push_back(enc.offsets[s] + 1 + static_cast<int>(i));
    }
  }
  Var lh = gather_cols(mlp.lab_head, hidx);
  Var ld = gather_cols(mlp.lab_dep, didx);
  Var bil = matmul(tape.param(m.params[m.lab_u]), column_kron(lh, ld));
  Var lin = matmul(tape.param(m.params[m.lab_w]), ad::concat_rows({lh, ld}));
  return add_bias(add(bil, lin), tape.param(m.params[m.lab_b]));
}

ParseLoss parse_loss(Tape& tape, const ParserModel& m, const std::vector<const SentenceFeatures*>& batch,
                     const std::vector<const Sentence*>& gold, Rng* dropout_rng) {
  if (batch.size() != gold.size()) throw PreconditionError("parse_loss: batch and gold differ in size");
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (static_cast<Eigen::Index>(gold[s]->size()) != batch[s]->layers[0].cols())
      throw PreconditionError("parse_loss: token count mismatch");
    const std::string why = tree_violation(gold[s]->heads);
    if (!why.empty()) throw PreconditionError("parse_loss: gold is not a tree (" + why + ")");
  }
  Encoded enc = encode(tape, m, batch, dropout_rng);
  MlpOutputs mlp = mlp_outputs(tape, m, enc);

  std::vector<Var> terms;
  std::vector<std::vector<int>> heads;
  std::vector<std::pair<int, int>> label_entries;
  std::size_t tokens = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const int n = enc.lengths[s];
    Matrix mask = Matrix::Zero(n + 1, n);
    for (int d = 0; d < n; ++d) mask(d + 1, d) = -1e30;
    Var scores = add(arc_scores(m, enc, mlp, s), tape.constant(std::move(mask)));
    std::vector<std::pair<int, int>> entries;
    for (int d = 0; d < n; ++d) entries.emplace_back(gold[s]->heads[static_cast<std::size_t>(d)], d);
    terms.push_back(sum(pick(log_softmax(scores), entries)));
    heads.push_back(gold[s]->heads);
    for (int d = 0; d < n; ++d) {
      const int l = m.label_id(gold[s]->labels[static_cast<std::size_t>(d)]);
      if (l < 0) throw PreconditionError("parse_loss: label '" + gold[s]->labels[static_cast<std::size_t>(d)] + "' not in inventory");
      label_entries.emplace_back(l, static_cast<int>(tokens) + d);
    }
    tokens += static_cast<std::size_t>(n);
  }
  Var lab = log_softmax(label_scores(tape, m, enc, mlp, heads));
  terms.push_back(sum(pick(lab, label_entries)));
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return {scale(total, -1.0 / static_cast<double>(tokens)), tokens};
}

// --- decoding --------------------------------------------------------------------

std::vector<int> greedy_decode(const Matrix& scores) {
  const Eigen::Index n = scores.cols();
  if (scores.rows() != n + 1) throw PreconditionError("greedy_decode: expected (n+1) x n scores");
  std::vector<int> heads(static_cast<std::size_t>(n));
  for (Eigen::Index d = 0; d < n; ++d) {
    int best = -1;
    for (Eigen::Index h = 0; h <= n; ++h) {
      if (h == d + 1) continue;
      if (best < 0 || scores(h, d) > scores(best, d)) best = static_cast<int>(h);
    }
    heads[static_cast<std::size_t>(d)] = best;
  }
  return heads;
}

std::vector<Sentence> parse_features(const ParserModel& m, const std::vector<Sentence>& sentences,
                                     const std::vector<SentenceFeatures>& features, bool use_mst) {
  std::vector<Sentence> out;
  out.reserve(sentences.size());
  const std::size_t chunk = 64;
  for (std::size_t start = 0; start < sentences.size(); start += chunk) {
    const std::size_t end = std::min(sentences.size(), start + chunk);
    std::vector<const SentenceFeatures*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&features[i]);
    Tape tape(false);
    Encoded enc = encode(tape, m, batch, nullptr);
    MlpOutputs mlp = mlp_outputs(tape, m, enc);
    std::vector<std::vector<int>> heads;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const Matrix& sc = arc_scores(m, enc, mlp, s).value();
      require_finite(sc, "arc scores");
      heads.push_back(use_mst ? mst_decode(sc) : greedy_decode(sc));
    }
    const Matrix& lab = label_scores(tape, m, enc, mlp, heads).value();
    Eigen::Index col = 0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      Sentence p = sentences[start + s];
      p.heads = heads[s];
      p.labels.assign(p.tokens.size(), "");
      for (std::size_t i = 0; i < p.tokens.size(); ++i, ++col) {
        Eigen::Index best = 0;
        lab.col(col).maxCoeff(&best);
        p.labels[i] = m.labels[static_cast<std::size_t>(best)];
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Sentence> parse(const ParserModel& m, const Embedder& embedder, const std::vector<Sentence>& sentences,
                            bool use_mst) {
  if (embedder.dim() != m.input_dim || embedder.layer_count() != m.input_layers)
    throw PreconditionError("parse: embedder does not match the model input");
  for (const auto& s : sentences)
    if (s.tokens.empty()) throw PreconditionError("parse: empty sentence");
  return parse_features(m, sentences, embedder.features(sentences), use_mst);
}

AttachmentScores evaluate(const std::vector<Sentence>& pred, const std::vector<Sentence>& gold) {
  if (pred.size() != gold.size())
    throw PreconditionError("evaluate: " + std::to_string(pred.size()) + " predicted vs " +
                            std::to_string(gold.size()) + " gold sentences");
  std::size_t total = 0, uas = 0, las = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto& p = pred[s];
    const auto& g = gold[s];
    if (p.size() != g.size() || p.heads.size() != g.size() || p.labels.size() != g.size())
      throw PreconditionError("evaluate: token count mismatch in sentence " + std::to_string(s + 1));
    for (std::size_t i = 0; i < g.size(); ++i) {
      ++total;
      if (p.heads[i] == g.heads[i]) {
        ++uas;
        if (p.labels[i] == g.labels[i]) ++las;
      }
    }
  }
  AttachmentScores r;
  r.tokens = total;
  if (total > 0) {
    r.uas = 100.0 * static_cast<double>(uas) / static_cast<double>(total);
    r.las = 100.0 * static_cast<double>(las) / static_cast<double>(total);
  }
  return r;
}

AttachmentScores evaluate(const Treebank& pred, const Treebank& gold) { return evaluate(pred.sentences, gold.sentences); }

// --- training --------------------------------------------------------------------

ParserTrainResult train_parser(const std::vector<Treebank>& sources, const Treebank& target, const Treebank& dev,
                               const Embedder& embedder, const ParserConfig& cfg, const ParserTrainOptions& opts) {
  std::vector<Sentence> src, tgt;
  for (const auto& tb : sources) src.insert(src.end(), tb.sentences.begin(), tb.sentences.end());
  tgt = target.sentences;
  if (src.empty() && tgt.empty()) throw PreconditionError("train_parser: empty training data");
  // A lone target treebank is trained like a source.
  if (src.empty()) std::swap(src, tgt);
  if (cfg.batch_size < 2 || cfg.batch_size % 2 != 0)
    throw PreconditionError("train_parser: batch_size must be even and >= 2");

  std::set<std::string> label_set;
  for (const auto* pool : {&src, &tgt})
    for (const auto& s : *pool) {
      const std::string why = tree_violation(s.heads);
      if (!why.empty()) throw PreconditionError("train_parser: training sentence is not a tree (" + why + ")");
      label_set.insert(s.labels.begin(), s.labels.end());
    }

  ParserTrainResult res;
  res.model = ParserModel::init(cfg, std::vector<std::string>(label_set.begin(), label_set.end()), embedder.dim(),
                                embedder.layer_count(), cfg.seed);
  res.model.embedder = embedder.describe();
  ParserModel& m = res.model;

  const auto src_feats = embedder.features(src);
  const auto tgt_feats = embedder.features(tgt);
  const auto dev_feats = embedder.features(dev.sentences);

  Adam opt(m.params, cfg.learning_rate, cfg.beta1, cfg.beta2);
  Rng rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 7);
  std::vector<Matrix> best = m.params.snapshot();
  res.best_dev_las = -1.0;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = stratified_batches(src.size(), tgt.size(), static_cast<std::size_t>(cfg.batch_size), rng);
    double loss_sum = 0.0;
    std::size_t tok_sum = 0;
    for (const auto& b : batches) {
      std::vector<const SentenceFeatures*> feats;
      std::vector<const Sentence*> gold;
      for (std::size_t i : b.source) {
        feats.push_back(&src_feats[i]);
        gold.push_back(&src[i]);
      }
      for (std::size_t i : b.target) {
        feats.push_back(&tgt_feats[i]);
        gold.push_back(&tgt[i]);
      }
      m.params.zero_grad();
      Tape tape;
      ParseLoss loss = parse_loss(tape, m, feats, gold, &rng);
      tape.backward(loss.mean);
      clip_grad_norm(m.params, cfg.clip_norm);
      opt.step(m.params);
      loss_sum += loss.mean.scalar() * static_cast<double>(loss.tokens);
      tok_sum += loss.tokens;
    }
    double dev_las = 0.0;
    if (!dev.empty()) dev_las = evaluate(parse_features(m, dev.sentences, dev_feats, !cfg.greedy_dev), dev.sentences).las;
    res.epochs_run = epoch;
    if (opts.on_epoch) opts.on_epoch(epoch, loss_sum / static_cast<double>(std::max<std::size_t>(tok_sum, 1)), dev_las);
    if (dev.empty() || dev_las > res.best_dev_las) {
      res.best_dev_las = dev_las;
      res.best_epoch = epoch;
      best = m.params.snapshot();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  m.params.restore(best);
  if (res.best_dev_las < 0.0) res.best_dev_las = 0.0;
  return res;
}

// --- persistence -----------------------------------------------------------------

void save_parser(const std::string& path, const ParserModel& m) {
  Checkpoint ck;
  ck.format = "polyparse-parser";
  ck.version = 1;
  ck.meta = {{"config", m.config.to_json()},
             {"labels", m.labels},
             {"input_dim", m.input_dim},
             {"input_layers", m.input_layers},
             {"embedder", m.embedder}};
  ck.params = m.params;
  save_checkpoint(path, ck);
}

ParserModel load_parser(const std::string& path) {
  Checkpoint ck = load_checkpoint(path, "polyparse-parser", 1);
  ParserModel m = ParserModel::init(ParserConfig::from_json(ck.meta.at("config")),
                                    ck.meta.at("labels").get<std::vector<std::string>>(),
                                    ck.meta.at("input_dim").get<int>(), ck.meta.at("input_layers").get<int>(), 0);
  m.embedder = ck.meta.value("embedder", nlohmann::json::object());
  assign_params(m.params, ck.params);
  return m;
}

}  // namespace polyparse
