#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "polyparse/corpus.hpp"

namespace polyparse::synth {

// Sentences from a small English-like grammar: six noun classes with
// selectional preferences, number/tense agreement, prepositional
// attachment and clause coordination, annotated with UD-style relations.
Treebank generate(std::size_t sentences, std::uint64_t seed, const std::string& language = "en");

// Every surface form the grammar can emit.
std::vector<std::string> lexicon();

// Letter substitution into a disjoint alphabet (uppercase letters, and a
// different symbol for punctuation). Applied word by word it is a
// deterministic word-level cipher that keeps the syntax intact.
class Cipher {
 public:
  explicit Cipher(std::uint64_t seed);
  std::string word(const std::string& w) const;
  Sentence sentence(const Sentence& s, const std::string& language) const;
  Treebank treebank(const Treebank& tb, const std::string& language) const;

 private:
  std::unordered_map<char, char> map_;
};

struct DictionarySplit {
  BilingualDictionary train;
  BilingualDictionary test;
};

// Disjoint train/test pairs (cipher word, plain word) drawn from plain words
// occurring at least `min_count` times in `corpus`, punctuation excluded.
DictionarySplit cipher_dictionaries(const Treebank& corpus, const Cipher& cipher, std::size_t n_train,
                                    std::size_t n_test, int min_count, std::uint64_t seed);

}  // namespace polyparse::synth
