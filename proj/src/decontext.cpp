#include "polyparse/decontext.hpp"

#include <algorithm>
#include <filesystem>

#include "polyparse/error.hpp"

namespace polyparse {

using ad::Tape;
using ad::Var;

const LayeredEmbedding* LayerTable::find(const std::string& w) const {
  auto it = index_.find(w);
  return it == index_.end() ? nullptr : &entries[it->second];
}

void LayerTable::add(std::string w, LayeredEmbedding e, std::int64_t count) {
  if (w.empty()) throw PreconditionError("layer table: empty word");
  if (index_.count(w)) throw PreconditionError("layer table: duplicate word '" + w + "'");
  if (!entries.empty()) {
    for (int j = 0; j < 3; ++j)
      if (e.layers[j].size() != entries[0].layers[j].size())
        throw PreconditionError("layer table: dimension mismatch for '" + w + "'");
  }
  index_.emplace(w, words.size());
  words.push_back(std::move(w));
  entries.push_back(std::move(e));
  counts.push_back(count);
}

VectorTable LayerTable::layer(int j) const {
  VectorTable t;
  t.dim = dim();
  for (std::size_t i = 0; i < words.size(); ++i) t.add(words[i], entries[i].layers[j]);
  return t;
}

bool LayerTable::operator==(const LayerTable& o) const {
  return kind == o.kind && lm_id == o.lm_id && min_count == o.min_count && words == o.words &&
         entries == o.entries && counts == o.counts;
}

namespace {

// Cell with h_{t-1} = c_{t-1} = 0.
Var zero_state_cell(Tape& tape, const LMParams& lm, const LstmCellParams& cell, Var x) {
  const Eigen::Index h = lm.config.lstm_size;
  Var pre = add_bias(matmul(tape.param(lm.params[cell.w]), x), tape.param(lm.params[cell.b]));
  Var i = sigmoid(slice_rows(pre, 0, h));
  Var g = tanh(slice_rows(pre, 2 * h, h));
  Var o = sigmoid(slice_rows(pre, 3 * h, h));
  Var c = mul(i, g);
  Var out = mul(o, tanh(c));
  if (cell.has_projection) out = matmul(tape.param(lm.params[cell.proj]), out);
  return out;
}

}  // namespace

LayeredEmbedding decontextualize(const LMParams& lm, const std::string& word, const DecontextOptions& opts) {
  const bool skip = opts.skip_connections.value_or(lm.config.skip_connections);
  Tape tape(false);
  Var x = char_cnn_encode(tape, lm, {word});
  std::array<std::array<Vector, 2>, 2> h;  // [layer][dir]
  for (int dir = 0; dir < 2; ++dir) {
    Var h1 = zero_state_cell(tape, lm, lm.cells[dir][0], x);
    Var in2 = skip ? add(h1, x) : h1;
    Var h2 = zero_state_cell(tape, lm, lm.cells[dir][1], in2);
    h[0][dir] = h1.value().col(0);
    h[1][dir] = h2.value().col(0);
  }
  LayeredEmbedding e;
  const Vector v = x.value().col(0);
  e.layers[0].resize(2 * v.size());
  e.layers[0] << v, v;
  for (int layer = 0; layer < 2; ++layer) {
    e.layers[layer + 1].resize(h[layer][0].size() + h[layer][1].size());
    e.layers[layer + 1] << h[layer][0], h[layer][1];
  }
  return e;
}

DecontextTable decontextualize_vocab(const LMParams& lm, const std::vector<std::vector<std::string>>& corpus,
                                     int min_count, const DecontextOptions& opts) {
  if (min_count < 1) throw PreconditionError("decontextualize_vocab: min_count must be >= 1");
  const auto tokens = flatten(corpus);
  if (tokens.empty()) throw PreconditionError("decontextualize_vocab: empty corpus");
  const auto counts = count_words(tokens);
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (const auto& [w, c] : counts)
    if (c >= min_count) kept.emplace_back(w, c);
  if (kept.empty())
    throw PreconditionError("decontextualize_vocab: no word occurs " + std::to_string(min_count) + " times or more");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  DecontextTable table;
  table.kind = "decontext";
  table.lm_id = lm.id;
  table.min_count = min_count;
  for (const auto& [w, c] : kept) table.add(w, decontextualize(lm, w, opts), c);
  return table;
}

void save_layer_table(const std::string& prefix, const LayerTable& table, int decimals) {
  for (int j = 0; j < 3; ++j) write_file(prefix + ".l" + std::to_string(j), write_vectors(table.layer(j), decimals));
  nlohmann::json meta = {{"kind", table.kind},
                         {"lm_id", table.lm_id},
                         {"min_count", table.min_count},
                         {"words", table.words},
                         {"counts", table.counts}};
  write_file(prefix + ".meta", meta.dump(1) + "\n");
}

LayerTable load_layer_table(const std::string& prefix) {
  std::array<VectorTable, 3> layers;
  for (int j = 0; j < 3; ++j) layers[j] = read_vectors(read_file(prefix + ".l" + std::to_string(j)));
  for (int j = 1; j < 3; ++j)
    if (layers[j].words != layers[0].words || layers[j].dim != layers[0].dim)
      throw InputError(prefix + ".l" + std::to_string(j) + ": words or dimension differ from layer 0", 1);

  LayerTable t;
  std::vector<std::int64_t> counts(layers[0].size(), 1);
  const std::string meta_path = prefix + ".meta";
  if (std::filesystem::exists(meta_path)) {
    const auto meta = nlohmann::json::parse(read_file(meta_path));
    t.kind = meta.value("kind", "");
    t.lm_id = meta.value("lm_id", "");
    t.min_count = meta.value("min_count", 1);
    if (meta.contains("counts") && meta.at("words").get<std::vector<std::string>>() == layers[0].words)
      counts = meta.at("counts").get<std::vector<std::int64_t>>();
  }
  for (std::size_t i = 0; i < layers[0].size(); ++i) {
    LayeredEmbedding e;
    for (int j = 0; j < 3; ++j) e.layers[j] = layers[j].vectors[i];
    t.add(layers[0].words[i], std::move(e), counts[i]);
  }
  return t;
}

}  // namespace polyparse
