#include "polyparse/bilm.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "polyparse/checkpoint.hpp"
#include "polyparse/error.hpp"
#include "polyparse/hash.hpp"
#include "polyparse/optim.hpp"

namespace polyparse {

using ad::Tape;
using ad::Var;

// --- config ------------------------------------------------------------------

int LmConfig::cnn_width() const {
  int n = 0;
  for (const auto& [w, f] : filters) n += f;
  return n;
}

int LmConfig::max_window() const {
  int m = 1;
  for (const auto& [w, f] : filters) m = std::max(m, w);
  return m;
}

nlohmann::json LmConfig::to_json() const {
  nlohmann::json f = nlohmann::json::array();
  for (const auto& [w, n] : filters) f.push_back({w, n});
  return {{"char_dim", char_dim},
          {"filters", f},
          {"max_word_chars", max_word_chars},
          {"lstm_size", lstm_size},
          {"projection_size", projection_size},
          {"skip_connections", skip_connections},
          {"dropout", dropout},
          {"batch_size", batch_size},
          {"max_sentence_length", max_sentence_length},
          {"epochs", epochs},
          {"learning_rate", learning_rate},
          {"adagrad_initial_accumulator", adagrad_initial_accumulator},
          {"clip_norm", clip_norm},
          {"min_count", min_count},
          {"seed", seed}};
}

LmConfig LmConfig::from_json(const nlohmann::json& j) {
  LmConfig c;
  const nlohmann::json known = c.to_json();
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw ConfigError("unknown key '" + k + "'");
  c.char_dim = j.value("char_dim", c.char_dim);
  if (j.contains("filters")) {
    c.filters.clear();
    for (const auto& f : j.at("filters")) c.filters.emplace_back(f.at(0).get<int>(), f.at(1).get<int>());
  }
  c.max_word_chars = j.value("max_word_chars", c.max_word_chars);
  c.lstm_size = j.value("lstm_size", c.lstm_size);
  c.projection_size = j.value("projection_size", c.projection_size);
  c.skip_connections = j.value("skip_connections", c.skip_connections);
  c.dropout = j.value("dropout", c.dropout);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_sentence_length = j.value("max_sentence_length", c.max_sentence_length);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.adagrad_initial_accumulator = j.value("adagrad_initial_accumulator", c.adagrad_initial_accumulator);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.min_count = j.value("min_count", c.min_count);
  c.seed = j.value("seed", c.seed);
  if (c.char_dim <= 0 || c.lstm_size <= 0 || c.projection_size < 0 || c.filters.empty() || c.batch_size <= 0 ||
      c.max_sentence_length <= 0 || c.epochs < 0 || c.min_count < 1 || c.dropout < 0.0 || c.dropout >= 1.0) {
    throw PreconditionError("invalid language model configuration");
  }
  for (const auto& [w, n] : c.filters)
    if (w <= 0 || n <= 0) throw PreconditionError("invalid char-CNN filter (" + std::to_string(w) + ", " + std::to_string(n) + ")");
  if (c.max_word_chars < 3) throw PreconditionError("max_word_chars must be >= 3");
  return c;
}

// --- parameters --------------------------------------------------------------

LMParams LMParams::init(const LmConfig& cfg, Vocabulary vocab, std::uint64_t seed) {
  LMParams lm;
  lm.config = cfg;
  lm.vocab = std::move(vocab);
  Rng rng(seed);
  auto glorot = [&](int rows, int cols) {
    return rng.uniform_matrix(rows, cols, std::sqrt(6.0 / (rows + cols)));
  };

  const int cd = cfg.char_dim;
  const int d = cfg.token_dim();
  const int h = cfg.lstm_size;
  auto& ps = lm.params;
  lm.char_embedding = ps.add("char_embedding", rng.uniform_matrix(cd, lm.vocab.char_count(), 1.0));
  for (const auto& [win, count] : cfg.filters) {
    ConvParams cp;
    cp.window = win;
    const std::string base = "cnn.conv" + std::to_string(win) + "x" + std::to_string(count);
    cp.w = ps.add(base + ".w", glorot(count, cd * win));
    cp.b = ps.add(base + ".b", Matrix::Zero(count, 1));
    lm.convs.push_back(cp);
  }
  lm.cnn_proj_w = ps.add("cnn.proj.w", glorot(d, cfg.cnn_width()));
  lm.cnn_proj_b = ps.add("cnn.proj.b", Matrix::Zero(d, 1));

  for (int dir = 0; dir < 2; ++dir) {
    for (int layer = 0; layer < 2; ++layer) {
      const std::string base = std::string(dir == kForward ? "fwd" : "bwd") + ".l" + std::to_string(layer + 1);
      LstmCellParams& c = lm.cells[dir][layer];
      const double s = 1.0 / std::sqrt(static_cast<double>(h));
      c.w = ps.add(base + ".w", rng.uniform_matrix(4 * h, d, s));
      c.u = ps.add(base + ".u", rng.uniform_matrix(4 * h, d, s));
      Matrix b = Matrix::Zero(4 * h, 1);
      b.middleRows(h, h).setOnes();  // forget-gate bias
      c.b = ps.add(base + ".b", b);
      c.has_projection = cfg.projection_size > 0;
      if (c.has_projection) c.proj = ps.add(base + ".proj", glorot(d, h));
    }
  }
  lm.softmax_w = ps.add("softmax.w", rng.uniform_matrix(lm.vocab.word_count(), d, 1.0 / std::sqrt(d)));
  lm.softmax_b = ps.add("softmax.b", Matrix::Zero(lm.vocab.word_count(), 1));
  lm.id = fingerprint(lm);
  return lm;
}

void LMParams::zero_all() {
  for (auto& p : params) p.value.setZero();
}

// --- forward pieces ------------------------------------------------------------

namespace {

std::vector<int> word_char_sequence(const LMParams& lm, const std::string& word) {
  const auto& cfg = lm.config;
  std::vector<int> ids = lm.vocab.encode_chars(word);
  const std::size_t max_inner = static_cast<std::size_t>(cfg.max_word_chars - 2);
  if (ids.size() > max_inner) ids.resize(max_inner);
  std::vector<int> seq;
  seq.reserve(ids.size() + 2);
  seq.push_back(Vocabulary::kBow);
  seq.insert(seq.end(), ids.begin(), ids.end());
  seq.push_back(Vocabulary::kEow);
  while (static_cast<int>(seq.size()) < cfg.max_window()) seq.push_back(Vocabulary::kPadChar);
  return seq;
}

Matrix dropout_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double p) {
  Matrix m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.bernoulli(p) ? 0.0 : keep;
  return m;
}

// Recurrent graph over a padded batch. Each direction reads its sentences
// left-aligned (the backward direction reads each sentence reversed), so
// padding only ever trails real positions.
struct BilmGraph {
  Var cnn;
  std::vector<std::vector<int>> word_col;                  // [sentence][position] -> cnn column
  std::array<std::array<std::vector<Var>, 2>, 2> states;   // [dir][layer][step], exposed h (no dropout)
  std::array<std::vector<Var>, 2> top;                     // [dir][step], input to the softmax
  std::size_t batch = 0;
  std::size_t steps = 0;
};

BilmGraph build_graph(Tape& tape, const LMParams& lm, const std::vector<std::vector<std::string>>& sentences,
                      Rng* dropout_rng) {
  BilmGraph g;
  g.batch = sentences.size();
  std::map<std::string, int> unique;
  std::vector<std::string> words;
  for (const auto& s : sentences) {
    std::vector<int> cols;
    for (const auto& w : s) {
      auto [it, fresh] = unique.emplace(w, static_cast<int>(words.size()));
      if (fresh) words.push_back(w);
      cols.push_back(it->second);
    }
    g.word_col.push_back(std::move(cols));
    g.steps = std::max(g.steps, s.size());
  }
  g.cnn = char_cnn_encode(tape, lm, words);

  const Eigen::Index b = static_cast<Eigen::Index>(g.batch);
  const int d = lm.config.token_dim();
  const int h = lm.config.lstm_size;
  const double p = lm.config.dropout;
  const bool drop = dropout_rng != nullptr && p > 0.0;

  for (int dir = 0; dir < 2; ++dir) {
    LstmState s1{tape.constant(Matrix::Zero(d, b)), tape.constant(Matrix::Zero(h, b))};
    LstmState s2{tape.constant(Matrix::Zero(d, b)), tape.constant(Matrix::Zero(h, b))};
    for (std::size_t t = 0; t < g.steps; ++t) {
      std::vector<int> idx(g.batch, 0);
      for (std::size_t s = 0; s < g.batch; ++s) {
        const std::size_t n = g.word_col[s].size();
        if (t < n) idx[s] = g.word_col[s][dir == kForward ? t : n - 1 - t];
      }
      Var x = gather_cols(g.cnn, idx);
      s1 = lstm_step(tape, lm, lm.cells[dir][0], x, s1.h, s1.c);
      Var in2 = s1.h;
      if (drop) in2 = mul(in2, tape.constant(dropout_mask(*dropout_rng, d, b, p)));
      if (lm.config.skip_connections) in2 = add(in2, x);
      s2 = lstm_step(tape, lm, lm.cells[dir][1], in2, s2.h, s2.c);
      g.states[dir][0].push_back(s1.h);
      g.states[dir][1].push_back(s2.h);
      Var top = s2.h;
      if (drop) top = mul(top, tape.constant(dropout_mask(*dropout_rng, d, b, p)));
      g.top[dir].push_back(top);
    }
  }
  return g;
}

}  // namespace

Var char_cnn_encode(Tape& tape, const LMParams& lm, const std::vector<std::string>& words) {
  if (words.empty()) throw PreconditionError("char_cnn_encode: no words");
  std::vector<std::vector<int>> seqs;
  seqs.reserve(words.size());
  for (const auto& w : words) seqs.push_back(word_char_sequence(lm, w));

  Var emb = tape.param(lm.params[lm.char_embedding]);
  std::vector<Var> pooled;
  for (const ConvParams& conv : lm.convs) {
    const int win = conv.window;
    std::vector<int> segments;
    for (const auto& s : seqs) segments.push_back(static_cast<int>(s.size()) - win + 1);
    std::vector<Var> parts;
    for (int k = 0; k < win; ++k) {
      std::vector<int> idx;
      for (const auto& s : seqs)
        for (std::size_t pos = 0; pos + win <= s.size(); ++pos) idx.push_back(s[pos + k]);
      parts.push_back(gather_cols(emb, idx));
    }
    Var patches = win == 1 ? parts[0] : concat_rows(parts);
    Var conv_out = add_bias(matmul(tape.param(lm.params[conv.w]), patches), tape.param(lm.params[conv.b]));
    pooled.push_back(max_pool(conv_out, segments));
  }
  Var features = relu(pooled.size() == 1 ? pooled[0] : concat_rows(pooled));
  return add_bias(matmul(tape.param(lm.params[lm.cnn_proj_w]), features), tape.param(lm.params[lm.cnn_proj_b]));
}

Vector char_cnn_encode(const LMParams& lm, const std::string& word) {
  Tape tape(false);
  return char_cnn_encode(tape, lm, {word}).value().col(0);
}

LstmState lstm_cell(Var w, Var u, Var b, Var x, Var h_prev, Var c_prev) {
  const Eigen::Index h = w.rows() / 4;
  Var pre = add_bias(add(matmul(w, x), matmul(u, h_prev)), b);
  Var i = sigmoid(slice_rows(pre, 0, h));
  Var f = sigmoid(slice_rows(pre, h, h));
  Var g = tanh(slice_rows(pre, 2 * h, h));
  Var o = sigmoid(slice_rows(pre, 3 * h, h));
  Var c = add(mul(f, c_prev), mul(i, g));
  return {mul(o, tanh(c)), c};
}

LstmState lstm_step(Tape& tape, const LMParams& lm, const LstmCellParams& cell, Var x, Var h_prev, Var c_prev) {
  LstmState s = lstm_cell(tape.param(lm.params[cell.w]), tape.param(lm.params[cell.u]), tape.param(lm.params[cell.b]),
                          x, h_prev, c_prev);
  if (cell.has_projection) s.h = matmul(tape.param(lm.params[cell.proj]), s.h);
  return s;
}

std::vector<std::vector<LayeredEmbedding>> bilm_forward_batch(const LMParams& lm,
                                                              const std::vector<std::vector<std::string>>& sentences,
                                                              std::size_t chunk) {
  std::vector<std::vector<LayeredEmbedding>> out;
  out.reserve(sentences.size());
  const int d = lm.config.token_dim();
  for (std::size_t start = 0; start < sentences.size(); start += chunk) {
    const std::size_t end = std::min(sentences.size(), start + chunk);
    std::vector<std::vector<std::string>> batch;
    for (std::size_t i = start; i < end; ++i) {
      if (sentences[i].empty()) throw PreconditionError("bilm_forward: empty sentence");
      batch.push_back(sentences[i]);
    }
    Tape tape(false);
    BilmGraph g = build_graph(tape, lm, batch, nullptr);
    const Matrix& cnn = g.cnn.value();
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const std::size_t n = batch[s].size();
      std::vector<LayeredEmbedding> sent(n);
      const auto col = static_cast<Eigen::Index>(s);
      for (std::size_t p = 0; p < n; ++p) {
        LayeredEmbedding& e = sent[p];
        const Vector x = cnn.col(g.word_col[s][p]);
        e.layers[0].resize(2 * d);
        e.layers[0] << x, x;
        for (int layer = 0; layer < 2; ++layer) {
          e.layers[layer + 1].resize(2 * d);
          e.layers[layer + 1] << g.states[kForward][layer][p].value().col(col),
              g.states[kBackward][layer][n - 1 - p].value().col(col);
        }
      }
      out.push_back(std::move(sent));
    }
  }
  return out;
}

std::vector<LayeredEmbedding> bilm_forward(const LMParams& lm, const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw PreconditionError("bilm_forward: empty sentence");
  return bilm_forward_batch(lm, {tokens}, 1).front();
}

LmLoss lm_loss(Tape& tape, const LMParams& lm, const std::vector<std::vector<std::string>>& sentences,
               Rng* dropout_rng) {
  if (sentences.empty()) throw PreconditionError("lm_loss: empty batch");
  for (const auto& s : sentences)
    if (s.empty()) throw PreconditionError("lm_loss: empty sentence");
  BilmGraph g = build_graph(tape, lm, sentences, dropout_rng);
  const auto b = static_cast<int>(g.batch);
  Var sw = tape.param(lm.params[lm.softmax_w]);
  Var sb = tape.param(lm.params[lm.softmax_b]);

  std::vector<Var> picked;
  std::size_t count = 0;
  for (int dir = 0; dir < 2; ++dir) {
    Var tops = g.top[dir].size() == 1 ? g.top[dir][0] : concat_cols(g.top[dir]);
    Var logp = log_softmax(add_bias(matmul(sw, tops), sb));
    std::vector<std::pair<int, int>> entries;
    for (int s = 0; s < b; ++s) {
      const auto& sent = sentences[static_cast<std::size_t>(s)];
      const int n = static_cast<int>(sent.size());
      for (int t = 0; t < n; ++t) {
        int target;
        if (dir == kForward) {
          target = t + 1 < n ? lm.vocab.word_id(sent[static_cast<std::size_t>(t + 1)]) : Vocabulary::kEos;
        } else {
          const int pos = n - 1 - t;  // original position being read
          target = pos > 0 ? lm.vocab.word_id(sent[static_cast<std::size_t>(pos - 1)]) : Vocabulary::kBos;
        }
        entries.emplace_back(target, t * b + s);
      }
    }
    count += entries.size();
    picked.push_back(sum(pick(logp, entries)));
  }
  Var total = add(picked[0], picked[1]);
  return {scale(total, -1.0 / static_cast<double>(count)), count};
}

std::vector<std::vector<std::string>> chunk_sentences(const std::vector<std::vector<std::string>>& sentences,
                                                      std::size_t max_len) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.size(); i += max_len) {
      out.emplace_back(s.begin() + static_cast<std::ptrdiff_t>(i),
                       s.begin() + static_cast<std::ptrdiff_t>(std::min(s.size(), i + max_len)));
    }
  }
  return out;
}

// --- training ----------------------------------------------------------------

LMParams train_lm(const std::vector<LanguageCorpus>& corpora, const LmConfig& cfg, const LmTrainOptions& opts) {
  if (corpora.empty()) throw PreconditionError("train_lm: no corpora");
  std::vector<std::string> all_tokens;
  std::vector<std::vector<std::vector<std::string>>> shards;
  for (const auto& c : corpora) {
    auto chunks = chunk_sentences(c.sentences, static_cast<std::size_t>(cfg.max_sentence_length));
    if (chunks.empty()) throw PreconditionError("train_lm: empty corpus for language '" + c.language + "'");
    for (const auto& s : chunks) all_tokens.insert(all_tokens.end(), s.begin(), s.end());
    shards.push_back(std::move(chunks));
  }

  Vocabulary vocab;
  if (opts.vocabulary) {
    const auto counts = count_words(all_tokens);
    std::vector<std::string> missing;
    for (const auto& [w, c] : counts)
      if (c >= cfg.min_count && !opts.vocabulary->contains_word(w)) missing.push_back(w);
    if (!missing.empty()) {
      std::sort(missing.begin(), missing.end());
      throw PreconditionError("train_lm: vocabulary mismatch, " + std::to_string(missing.size()) +
                              " corpus word(s) missing from the configured vocabulary (first: '" + missing[0] + "')");
    }
    vocab = *opts.vocabulary;
  } else {
    vocab = build_vocab(all_tokens, cfg.min_count);
  }

  LMParams lm = LMParams::init(cfg, std::move(vocab), cfg.seed);
  Adagrad opt(lm.params, cfg.learning_rate, cfg.adagrad_initial_accumulator);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (auto& shard : shards) rng.shuffle(shard);
    std::vector<const std::vector<std::string>*> order;
    std::size_t longest = 0;
    for (const auto& shard : shards) longest = std::max(longest, shard.size());
    for (std::size_t i = 0; i < longest; ++i)
      for (const auto& shard : shards)
        if (i < shard.size()) order.push_back(&shard[i]);

    double loss_sum = 0.0;
    std::size_t pred_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<std::vector<std::string>> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(*order[i]);
      lm.params.zero_grad();
      Tape tape;
      LmLoss loss = lm_loss(tape, lm, batch, &rng);
      tape.backward(loss.mean_nll);
      clip_grad_norm(lm.params, cfg.clip_norm);
      opt.step(lm.params);
      loss_sum += loss.mean_nll.scalar() * static_cast<double>(loss.predictions);
      pred_sum += loss.predictions;
    }
    lm.id = fingerprint(lm);
    if (opts.on_epoch) opts.on_epoch(epoch + 1, loss_sum / static_cast<double>(pred_sum), lm);
  }
  lm.id = fingerprint(lm);
  return lm;
}

double perplexity(const LMParams& lm, const std::vector<std::vector<std::string>>& sentences) {
  std::vector<std::vector<std::string>> nonempty;
  for (const auto& s : sentences)
    if (!s.empty()) nonempty.push_back(s);
  if (nonempty.empty()) throw PreconditionError("perplexity: empty input");
  const auto chunks = chunk_sentences(nonempty, static_cast<std::size_t>(lm.config.max_sentence_length));
  double nll = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < chunks.size(); start += 64) {
    std::vector<std::vector<std::string>> batch(chunks.begin() + static_cast<std::ptrdiff_t>(start),
                                                chunks.begin() + static_cast<std::ptrdiff_t>(std::min(chunks.size(), start + 64)));
    Tape tape(false);
    LmLoss l = lm_loss(tape, lm, batch, nullptr);
    nll += l.mean_nll.scalar() * static_cast<double>(l.predictions);
    count += l.predictions;
  }
  return std::exp(nll / static_cast<double>(count));
}

double perplexity(const LMParams& lm, const std::vector<std::string>& token_stream) {
  if (token_stream.empty()) throw PreconditionError("perplexity: empty input");
  return perplexity(lm, std::vector<std::vector<std::string>>{token_stream});
}

// --- persistence ---------------------------------------------------------------

std::string fingerprint(const LMParams& lm) {
  Fnv1a h;
  h.update(lm.config.to_json().dump());
  h.update(vocab_to_json(lm.vocab).dump());
  for (const auto& p : lm.params) {
    h.update(p.name);
    h.update(p.value.data(), static_cast<std::size_t>(p.value.size()) * sizeof(double));
  }
  return "lm-" + h.hex();
}

void save_lm(const std::string& path, const LMParams& lm) {
  Checkpoint ck;
  ck.format = "polyparse-bilm";
  ck.version = 1;
  ck.meta = {{"config", lm.config.to_json()}, {"vocab", vocab_to_json(lm.vocab)}, {"id", lm.id}};
  ck.params = lm.params;
  save_checkpoint(path, ck);
}

LMParams load_lm(const std::string& path) {
  Checkpoint ck = load_checkpoint(path, "polyparse-bilm", 1);
  LMParams lm = LMParams::init(LmConfig::from_json(ck.meta.at("config")), vocab_from_json(ck.meta.at("vocab")), 0);
  assign_params(lm.params, ck.params);
  lm.id = fingerprint(lm);
  return lm;
}

}  // namespace polyparse
