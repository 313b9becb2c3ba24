#pragma once

#include <array>
#include <string>
#include <string_view>

#include "polyparse/decontext.hpp"
#include "polyparse/scalar_mix.hpp"

namespace polyparse {

using AnchorTable = LayerTable;

// Per-word, per-layer mean of contextual vectors over every occurrence in
// the corpus (compensated summation).
AnchorTable compute_anchors(const LMParams& lm, const std::vector<std::vector<std::string>>& corpus,
                            std::size_t batch = 64);

enum class AlignMethod { Procrustes, LeastSquares };
const char* method_name(AlignMethod m);
AlignMethod parse_method(std::string_view s);

struct AlignmentMap {
  AlignMethod method = AlignMethod::Procrustes;
  std::string source_language;
  std::string target_language;
  std::string dictionary_id;
  std::array<Matrix, 3> w;
  std::size_t pairs_used = 0;
  std::size_t pairs_skipped = 0;
  std::array<bool, 3> rank_deficient{};

  static AlignmentMap identity(int dim);
  bool operator==(const AlignmentMap& o) const;
};

// Independently per layer, W minimizing ||W H_s - H_t||_F over the usable
// dictionary pairs (orthogonal W for Procrustes).
AlignmentMap fit_alignment(const LayerTable& source, const LayerTable& target, const BilingualDictionary& dict,
                           AlignMethod method = AlignMethod::Procrustes);

// Orthogonal W = U V^T from svd(H_t H_s^T) for paired columns.
Matrix procrustes(const Matrix& hs, const Matrix& ht);

// gamma * sum_j lambda_j W_j h_j.
Vector apply_alignment(const LayeredEmbedding& e, const AlignmentMap& map, const ScalarMix& mix);
// W_j h_j for each layer.
LayeredEmbedding map_layers(const LayeredEmbedding& e, const AlignmentMap& map);
LayerTable map_table(const LayerTable& t, const AlignmentMap& map);

std::string write_alignment(const AlignmentMap& map);
AlignmentMap read_alignment(std::string_view text);

}  // namespace polyparse
