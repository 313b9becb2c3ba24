#include <set>

#include <doctest.h>

#include "polyparse/error.hpp"
#include "polyparse/synth.hpp"

using namespace polyparse;

TEST_CASE("generated sentences are valid, labelled trees") {
  const Treebank tb = synth::generate(500, 3);
  REQUIRE(tb.size() == 500);
  const std::set<std::string> labels = {"nsubj", "obj", "det", "amod", "case", "nmod",
                                        "obl",   "advmod", "cc", "conj", "punct", "root"};
  const auto lexicon = synth::lexicon();
  const std::set<std::string> words(lexicon.begin(), lexicon.end());
  std::set<std::string> seen_labels;
  for (const auto& s : tb.sentences) {
    CHECK(is_tree(s.heads));
    CHECK(std::count(s.heads.begin(), s.heads.end(), 0) == 1);
    CHECK(s.tokens.back() == ".");
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(labels.count(s.labels[i]));
      CHECK(words.count(s.tokens[i]));
      CHECK((s.heads[i] == 0) == (s.labels[i] == "root"));
      seen_labels.insert(s.labels[i]);
    }
  }
  CHECK(seen_labels == labels);
}

TEST_CASE("generation is seeded") {
  CHECK(synth::generate(20, 1).sentences == synth::generate(20, 1).sentences);
  CHECK(synth::generate(20, 1).sentences != synth::generate(20, 2).sentences);
  CHECK(synth::generate(5, 1, "xx").sentences[0].language == "xx");
}

TEST_CASE("the vocabulary is a few hundred types") {
  const Treebank tb = synth::generate(3000, 9);
  std::set<std::string> types;
  for (const auto& s : tb.sentences) types.insert(s.tokens.begin(), s.tokens.end());
  CHECK(types.size() > 300);
  CHECK(types.size() < 900);
}

TEST_CASE("the cipher is a bijection onto a disjoint alphabet") {
  const synth::Cipher c(7);
  const auto lexicon = synth::lexicon();
  std::set<std::string> images;
  for (const auto& w : lexicon) {
    const std::string x = c.word(w);
    CHECK(x.size() == w.size());
    CHECK(images.insert(x).second);
    CHECK(std::find(lexicon.begin(), lexicon.end(), x) == lexicon.end());
  }
  CHECK(c.word("abc") != synth::Cipher(8).word("abc"));
  CHECK_THROWS_AS(c.word("caf\xc3\xa9"), PreconditionError);
}

TEST_CASE("ciphering keeps the syntax") {
  const Treebank plain = synth::generate(50, 4);
  const Treebank cx = synth::Cipher(1).treebank(plain, "cx");
  REQUIRE(cx.size() == plain.size());
  CHECK(cx.language == "cx");
  for (std::size_t i = 0; i < plain.size(); ++i) {
    CHECK(cx.sentences[i].heads == plain.sentences[i].heads);
    CHECK(cx.sentences[i].labels == plain.sentences[i].labels);
    CHECK(cx.sentences[i].language == "cx");
  }
}

TEST_CASE("cipher dictionaries are disjoint, frequent and correct") {
  const Treebank plain = synth::generate(2000, 6);
  const synth::Cipher c(7);
  const auto d = synth::cipher_dictionaries(plain, c, 100, 50, 3, 77);
  CHECK(d.train.size() == 100);
  CHECK(d.test.size() == 50);
  std::set<std::string> train_words;
  for (const auto& [s, t] : d.train.pairs) {
    CHECK(s == c.word(t));
    train_words.insert(t);
  }
  for (const auto& [s, t] : d.test.pairs) {
    CHECK(!train_words.count(t));
    CHECK(t != ".");
  }
  const auto again = synth::cipher_dictionaries(plain, c, 100, 50, 3, 77);
  CHECK(again.test.pairs == d.test.pairs);
  CHECK_THROWS_AS(synth::cipher_dictionaries(synth::generate(3, 1), c, 100, 50, 3, 1), PreconditionError);
}
