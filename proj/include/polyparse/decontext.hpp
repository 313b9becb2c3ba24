#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "polyparse/bilm.hpp"

namespace polyparse {

// Word-type table of three-layer vectors. Used both for decontextualized
// vectors and for corpus-averaged anchors.
struct LayerTable {
  std::string kind;   // "decontext" or "anchor"
  std::string lm_id;  // provenance: fingerprint of the producing model
  int min_count = 1;  // frequency filter applied when building
  std::vector<std::string> words;
  std::vector<LayeredEmbedding> entries;
  std::vector<std::int64_t> counts;  // corpus occurrences per word

  const LayeredEmbedding* find(const std::string& w) const;
  void add(std::string w, LayeredEmbedding e, std::int64_t count);
  std::size_t size() const { return words.size(); }
  int dim() const { return entries.empty() ? 0 : static_cast<int>(entries[0].layers[0].size()); }

  // Layer j as a table of plain vectors.
  VectorTable layer(int j) const;
  bool operator==(const LayerTable& o) const;

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

using DecontextTable = LayerTable;

struct DecontextOptions {
  // Skip connection into layer 2; unset mirrors the model's configuration.
  std::optional<bool> skip_connections;
};

// Context-free vectors: every LSTM cell is evaluated with zero recurrent
// state, so c = i * c~ and h = o * tanh(c).
LayeredEmbedding decontextualize(const LMParams& lm, const std::string& word, const DecontextOptions& opts = {});

// One pass over the word types occurring at least `min_count` times.
DecontextTable decontextualize_vocab(const LMParams& lm, const std::vector<std::vector<std::string>>& corpus,
                                     int min_count = 3, const DecontextOptions& opts = {});

// Writes <prefix>.l0, <prefix>.l1, <prefix>.l2 (word-vector text) and
// <prefix>.meta (JSON provenance and counts).
void save_layer_table(const std::string& prefix, const LayerTable& table, int decimals = 9);
LayerTable load_layer_table(const std::string& prefix);

}  // namespace polyparse
