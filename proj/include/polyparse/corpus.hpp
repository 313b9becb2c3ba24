#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polyparse/numerics.hpp"

namespace polyparse {

// A dependency-annotated sentence over syntactic words. heads[i] is the
// 1-based index of token i's head, 0 for the synthetic root.
struct Sentence {
  std::vector<std::string> tokens;
  std::vector<int> heads;
  std::vector<std::string> labels;
  std::string language;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const Sentence&) const = default;
};

// Empty string when `heads` is a tree rooted at 0, otherwise the reason.
std::string tree_violation(const std::vector<int>& heads);
bool is_tree(const std::vector<int>& heads);

enum class Split { Train, Dev, Test };
const char* split_name(Split s);

struct Treebank {
  std::string language;
  Split split = Split::Train;
  std::vector<Sentence> sentences;

  std::size_t size() const { return sentences.size(); }
  bool empty() const { return sentences.empty(); }
  std::size_t token_count() const;
};

// Sentences dropped by a lenient read, with the reason.
struct RejectedSentence {
  std::size_t sentence_index;
  long line;
  std::string reason;
};

struct ConlluOptions {
  // Skip invalid sentences instead of failing the whole read.
  bool skip_invalid = false;
  std::vector<RejectedSentence>* rejected = nullptr;
};

Treebank read_conllu(std::string_view text, const std::string& language, Split split = Split::Train,
                     const ConlluOptions& opts = {});
std::string write_conllu(const Treebank& tb);

// --- vocabulary -------------------------------------------------------------

// Word and character inventories. Reserved symbols occupy the first ids and
// are never looked up by surface form, so corpus tokens cannot collide.
class Vocabulary {
 public:
  static constexpr int kUnkWord = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kReservedWords = 3;

  static constexpr int kUnkChar = 0;
  static constexpr int kBow = 1;
  static constexpr int kEow = 2;
  static constexpr int kPadChar = 3;
  static constexpr int kReservedChars = 4;

  Vocabulary();

  int word_id(const std::string& w) const;  // kUnkWord when absent
  bool contains_word(const std::string& w) const { return word_index_.count(w) > 0; }
  const std::string& word(int id) const { return words_[static_cast<std::size_t>(id)]; }
  std::int64_t count(int id) const { return counts_[static_cast<std::size_t>(id)]; }
  int word_count() const { return static_cast<int>(words_.size()); }  // includes reserved
  int corpus_word_count() const { return word_count() - kReservedWords; }

  int char_id(const std::string& code_point) const;  // kUnkChar when absent
  const std::string& character(int id) const { return chars_[static_cast<std::size_t>(id)]; }
  int char_count() const { return static_cast<int>(chars_.size()); }

  // Character ids of a word (no boundary symbols).
  std::vector<int> encode_chars(const std::string& word) const;

  void add_word(const std::string& w, std::int64_t count);
  void add_char(const std::string& c);

  bool operator==(const Vocabulary& o) const {
    return words_ == o.words_ && counts_ == o.counts_ && chars_ == o.chars_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, int> word_index_;
  std::vector<std::string> chars_;
  std::unordered_map<std::string, int> char_index_;
};

// Words with count >= min_count (ordered by descending count, then bytes),
// plus every character seen in the stream.
Vocabulary build_vocab(const std::vector<std::string>& tokens, int min_count);

// Frequency of each word type in a token stream.
std::unordered_map<std::string, std::int64_t> count_words(const std::vector<std::string>& tokens);

// --- bilingual dictionaries ---------------------------------------------------

enum class DictDirection { SourceTarget, TargetSource };

struct BilingualDictionary {
  std::string id;
  Split split = Split::Train;
  std::vector<std::pair<std::string, std::string>> pairs;

  std::vector<std::string> targets_of(const std::string& source) const;
  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

BilingualDictionary read_dictionary(std::string_view text, DictDirection direction = DictDirection::SourceTarget,
                                    Split split = Split::Train);
std::string write_dictionary(const BilingualDictionary& dict);

// --- word vectors ---------------------------------------------------------------

struct VectorTable {
  int dim = 0;
  std::vector<std::string> words;
  std::vector<Vector> vectors;

  const Vector* find(const std::string& w) const;
  void add(std::string w, Vector v);
  std::size_t size() const { return words.size(); }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

VectorTable read_vectors(std::string_view text);
// Fixed-point with `decimals` digits after the point.
std::string write_vectors(const VectorTable& table, int decimals = 6);

// --- low-resource simulation -----------------------------------------------

struct SimulationConfig {
  std::size_t target_train_size = 0;  // |D_tau|
  std::uint64_t seed = 1;

  // Train:dev kept at 5:1; zero-target keeps both empty.
  std::size_t dev_size() const { return (target_train_size + 4) / 5; }
};

struct SplitPair {
  Treebank train;
  Treebank dev;
};

SplitPair downsample(const Treebank& tb, const SimulationConfig& cfg);

// Seeded uniform sample of `n` sentences without replacement.
Treebank subsample(const Treebank& tb, std::size_t n, std::uint64_t seed);

struct StratifiedBatch {
  std::vector<std::size_t> source;  // sentence indices into the source treebank
  std::vector<std::size_t> target;  // sentence indices into the target treebank
  std::size_t size() const { return source.size() + target.size(); }
};

// One epoch of batches, half source and half target. The epoch is sized by
// the larger side; the smaller side is resampled with replacement. With an
// empty target every batch is source-only.
std::vector<StratifiedBatch> stratified_batches(std::size_t source_size, std::size_t target_size,
                                                std::size_t batch_size, Rng& rng);

// --- files ---------------------------------------------------------------------

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Whitespace-separated tokens, one sentence per non-empty line.
std::vector<std::vector<std::string>> read_token_lines(std::string_view text);
std::vector<std::string> flatten(const std::vector<std::vector<std::string>>& sentences);

}  // namespace polyparse
