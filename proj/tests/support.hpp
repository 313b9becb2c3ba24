#pragma once

#include <string>
#include <vector>

#include "polyparse/autodiff.hpp"
#include "polyparse/bilm.hpp"
#include "polyparse/corpus.hpp"
#include "polyparse/parser.hpp"

namespace polyparse::testing {

inline LmConfig tiny_lm_config() {
  LmConfig c;
  c.char_dim = 4;
  c.filters = {{1, 3}, {2, 3}, {3, 4}};
  c.max_word_chars = 10;
  c.lstm_size = 6;
  c.projection_size = 4;
  c.dropout = 0.0;
  c.batch_size = 4;
  c.epochs = 1;
  return c;
}

inline Vocabulary small_vocab() {
  return build_vocab({"the", "cat", "sat", "on", "a", "mat", "dog", "ran", "cat", "the"}, 1);
}

// Overwrites every parameter with uniform noise so no gate or bias sits at
// a degenerate value.
inline void randomize(ad::ParameterSet& ps, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  for (auto& p : ps) p.value = rng.uniform_matrix(static_cast<int>(p.value.rows()), static_cast<int>(p.value.cols()), scale);
}

inline ParserConfig tiny_parser_config() {
  ParserConfig c;
  c.lstm_size = 4;
  c.lstm_layers = 3;
  c.arc_mlp = 5;
  c.label_mlp = 3;
  c.input_dropout = 0.0;
  c.dropout = 0.0;
  c.batch_size = 2;
  return c;
}

inline SentenceFeatures random_features(int dim, int layers, int n, Rng& rng) {
  SentenceFeatures f;
  for (int j = 0; j < layers; ++j) f.layers.push_back(rng.uniform_matrix(dim, n, 1.0));
  return f;
}

inline Sentence make_sentence(std::vector<std::string> tokens, std::vector<int> heads, std::vector<std::string> labels,
                              std::string language = "en") {
  return Sentence{std::move(tokens), std::move(heads), std::move(labels), std::move(language)};
}

inline std::vector<ad::Parameter*> all_params(ad::ParameterSet& ps) { return ps.pointers(); }

}  // namespace polyparse::testing
