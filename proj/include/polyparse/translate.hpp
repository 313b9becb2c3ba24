#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "polyparse/align.hpp"

namespace polyparse {

// Unit-normalized targets plus, for CSLS, the mean similarity r_S(y) of
// each target to its k nearest sources.
struct RetrievalIndex {
  std::vector<std::string> words;
  Matrix targets;  // d x |targets|, unit columns
  Matrix sources;  // d x |sources|, unit columns (empty for cosine-only use)
  int k = 0;
  Vector r_source;  // per target

  bool contains(const std::string& w) const;

 private:
  friend RetrievalIndex build_index(const std::vector<std::string>&, const std::vector<Vector>&,
                                    const std::vector<Vector>&, int);
  std::unordered_set<std::string> set_;
};

// Rejects zero vectors and k outside [1, min(|targets|, |sources|)]. With no
// sources, only cosine retrieval is available.
RetrievalIndex build_index(const std::vector<std::string>& target_words, const std::vector<Vector>& target_vectors,
                           const std::vector<Vector>& source_vectors, int k);

// 2 cos(x, y) - r_T(x) - r_S(y) for every target y.
Vector csls_scores(const Vector& x, const RetrievalIndex& index);
Vector cosine_scores(const Vector& x, const RetrievalIndex& index);

enum class RetrievalMode { Csls, Cosine };

struct Candidate {
  std::string word;
  double score;
};
struct RankedList {
  std::string source;
  std::vector<Candidate> candidates;
};

// Top-n targets per query; equal scores are ordered by target word.
std::vector<RankedList> translate(const std::vector<std::pair<std::string, Vector>>& queries,
                                  const RetrievalIndex& index, RetrievalMode mode, std::size_t top_n = 10);

struct PrecisionReport {
  double p_at_1 = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // sources absent from the queries, or every gold target outside the index
};

// A query is correct when its rank-1 candidate is any gold target.
PrecisionReport precision_at_1(const std::vector<RankedList>& ranked, const BilingualDictionary& test,
                               const RetrievalIndex* universe = nullptr);

struct TranslationOptions {
  RetrievalMode mode = RetrievalMode::Csls;
  int k = 10;
  // Candidates limited to targets named in the test dictionary.
  bool restrict_to_dictionary = false;
};

struct LayerReport {
  int layer = 0;
  std::string method;
  int k = 0;
  PrecisionReport precision;
};

// Maps source vectors with `map`, retrieves among target words, scores P@1
// on `test`, separately for each layer.
std::vector<LayerReport> evaluate_translation(const LayerTable& source, const LayerTable& target,
                                              const AlignmentMap& map, const BilingualDictionary& test,
                                              const TranslationOptions& opts = {});

std::string translation_tsv(const std::vector<LayerReport>& rows, const std::string& config_hash);

}  // namespace polyparse
