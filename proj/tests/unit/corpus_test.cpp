#include <algorithm>
#include <set>
#include <string>

#include <doctest.h>

#include "polyparse/corpus.hpp"
#include "polyparse/error.hpp"
#include "polyparse/utf8.hpp"

using namespace polyparse;

namespace {

const char* kTwoSentences =
    "# sent_id = 1\n"
    "1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_\n"
    "2\tdog\tdog\tNOUN\t_\t_\t3\tnsubj\t_\t_\n"
    "3\tbarks\tbark\tVERB\t_\t_\t0\troot\t_\t_\n"
    "\n"
    "1\tIt\tit\tPRON\t_\t_\t2\tnsubj\t_\t_\n"
    "1-2\tIt's\t_\t_\t_\t_\t_\t_\t_\t_\n"
    "2\truns\trun\tVERB\t_\t_\t0\troot\t_\t_\n"
    "2.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n"
    "\n";

}  // namespace

TEST_CASE("tree validation") {
  CHECK(is_tree({0}));
  CHECK(is_tree({2, 0, 2}));
  CHECK(is_tree({0, 1, 1, 3}));
  CHECK_FALSE(is_tree({1}));        // self-loop
  CHECK_FALSE(is_tree({2, 1}));     // cycle, no root
  CHECK_FALSE(is_tree({0, 3, 2}));  // cycle detached from root
  CHECK_FALSE(is_tree({4, 0, 1}));  // out of range
  CHECK(tree_violation({0, 3, 2}).find("cycle") != std::string::npos);
}

TEST_CASE("conllu reads words and skips multiword and empty nodes") {
  const Treebank tb = read_conllu(kTwoSentences, "en", Split::Dev);
  REQUIRE(tb.size() == 2);
  CHECK(tb.language == "en");
  CHECK(tb.split == Split::Dev);
  CHECK(tb.sentences[0].tokens == std::vector<std::string>{"The", "dog", "barks"});
  CHECK(tb.sentences[0].heads == std::vector<int>{2, 3, 0});
  CHECK(tb.sentences[1].tokens == std::vector<std::string>{"It", "runs"});
  CHECK(tb.sentences[1].labels == std::vector<std::string>{"nsubj", "root"});
  CHECK(tb.token_count() == 5);
}

TEST_CASE("conllu round trip is lossless on heads, labels and tokens") {
  const Treebank tb = read_conllu(kTwoSentences, "en");
  const Treebank again = read_conllu(write_conllu(tb), "en");
  CHECK(again.sentences == tb.sentences);
}

TEST_CASE("conllu errors carry the line number") {
  const std::string cyclic =
      "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n\n"
      "1\tb\t_\t_\t_\t_\t2\tdep\t_\t_\n"
      "2\tc\t_\t_\t_\t_\t1\tdep\t_\t_\n\n";
  try {
    read_conllu(cyclic, "en");
    FAIL("no error");
  } catch (const InputError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("cycle") != std::string::npos);
  }
  const std::string short_row = "1\ta\t_\t_\t_\t_\t0\n\n";
  CHECK_THROWS_AS(read_conllu(short_row, "en"), InputError);
}

TEST_CASE("lenient conllu drops only the invalid sentence") {
  const std::string text =
      "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n\n"
      "1\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n\n"
      "1\tc\t_\t_\t_\t_\t0\troot\t_\t_\n\n";
  std::vector<RejectedSentence> rejected;
  ConlluOptions opts;
  opts.skip_invalid = true;
  opts.rejected = &rejected;
  const Treebank tb = read_conllu(text, "en", Split::Train, opts);
  CHECK(tb.size() == 2);
  REQUIRE(rejected.size() == 1);
  CHECK(rejected[0].sentence_index == 1);
  CHECK(rejected[0].line == 3);
}

TEST_CASE("invalid utf-8 is reported") {
  CHECK_FALSE(utf8::valid("ab\xff"));
  CHECK_THROWS_AS(read_conllu("1\t\xc3\t_\t_\t_\t_\t0\troot\t_\t_\n", "en"), InputError);
  CHECK(utf8::code_points("na\xc3\xafve") == std::vector<std::string>{"n", "a", "\xc3\xaf", "v", "e"});
}

TEST_CASE("vocabulary reserves markers and orders by frequency") {
  const Vocabulary v = build_vocab({"b", "a", "b", "c", "b", "a"}, 2);
  CHECK(v.corpus_word_count() == 2);
  CHECK(v.word(Vocabulary::kReservedWords) == "b");
  CHECK(v.count(v.word_id("a")) == 2);
  CHECK(v.word_id("c") == Vocabulary::kUnkWord);
  // Characters cover the whole corpus, not only kept words.
  CHECK(v.char_id("c") != Vocabulary::kUnkChar);
  const auto ids = v.encode_chars("ab");
  CHECK(ids == std::vector<int>{v.char_id("a"), v.char_id("b")});
  CHECK(v.encode_chars("az")[1] == Vocabulary::kUnkChar);
  CHECK_THROWS(build_vocab({"x"}, 0));
}

TEST_CASE("dictionaries read in either direction") {
  const char* text = "chat cat\nchien dog\nchat kitty\n";
  const BilingualDictionary st = read_dictionary(text);
  CHECK(st.size() == 3);
  CHECK(st.targets_of("chat") == std::vector<std::string>{"cat", "kitty"});
  const BilingualDictionary ts = read_dictionary(text, DictDirection::TargetSource);
  CHECK(ts.targets_of("dog") == std::vector<std::string>{"chien"});
  CHECK(read_dictionary(write_dictionary(st)).pairs == st.pairs);
  CHECK_THROWS_AS(read_dictionary("a b c\n"), InputError);
}

TEST_CASE("word vectors round trip and validate") {
  VectorTable t;
  t.dim = 2;
  t.add("x", Vector::Constant(2, 0.5));
  t.add("y", Vector::Constant(2, -1.25));
  CHECK_THROWS(t.add("x", Vector::Zero(2)));
  CHECK_THROWS(t.add("z", Vector::Zero(3)));
  const VectorTable back = read_vectors(write_vectors(t));
  REQUIRE(back.size() == 2);
  CHECK(*back.find("y") == *t.find("y"));
  CHECK_THROWS_AS(read_vectors("2 2\na 1 2\n"), InputError);
  CHECK_THROWS_AS(read_vectors("1 2\na 1\n"), InputError);
}

TEST_CASE("downsample is seeded, disjoint and sized") {
  Treebank tb;
  for (int i = 0; i < 50; ++i) tb.sentences.push_back({{"w" + std::to_string(i)}, {0}, {"root"}, "xx"});
  for (std::size_t d : {0, 1, 10, 41}) {
    const SimulationConfig cfg{d, 9};
    const SplitPair a = downsample(tb, cfg);
    const SplitPair b = downsample(tb, cfg);
    CAPTURE(d);
    CHECK(a.train.size() == d);
    CHECK(a.dev.size() == (d + 4) / 5);
    CHECK(a.train.sentences == b.train.sentences);
    std::set<std::string> seen;
    for (const auto* part : {&a.train, &a.dev})
      for (const auto& s : part->sentences) CHECK(seen.insert(s.tokens[0]).second);
  }
  CHECK_THROWS_AS(downsample(tb, {42, 1}), PreconditionError);
  CHECK(downsample(tb, {10, 1}).train.sentences != downsample(tb, {10, 2}).train.sentences);
}

TEST_CASE("subsample keeps corpus order") {
  Treebank tb;
  for (int i = 0; i < 20; ++i) tb.sentences.push_back({{std::to_string(100 + i)}, {0}, {"root"}, "xx"});
  const Treebank s = subsample(tb, 7, 3);
  REQUIRE(s.size() == 7);
  CHECK(std::is_sorted(s.sentences.begin(), s.sentences.end(),
                       [](const Sentence& a, const Sentence& b) { return a.tokens[0] < b.tokens[0]; }));
}

TEST_CASE("stratified batches are half source, half target") {
  Rng rng(1);
  for (auto [ns, nt] : std::vector<std::pair<std::size_t, std::size_t>>{{100, 10}, {7, 30}, {40, 40}}) {
    const auto batches = stratified_batches(ns, nt, 8, rng);
    std::set<std::size_t> large_seen;
    const bool source_larger = ns >= nt;
    for (const auto& b : batches) {
      CHECK(b.source.size() == b.target.size());
      CHECK(b.size() <= 8);
      for (auto i : b.source) CHECK(i < ns);
      for (auto i : b.target) CHECK(i < nt);
      for (auto i : source_larger ? b.source : b.target) large_seen.insert(i);
    }
    // Each epoch covers the larger side exactly once.
    CHECK(large_seen.size() == std::max(ns, nt));
  }
  const auto only_source = stratified_batches(9, 0, 4, rng);
  CHECK(only_source.size() == 3);
  CHECK(only_source[0].target.empty());
  CHECK_THROWS(stratified_batches(10, 10, 5, rng));
}

TEST_CASE("token lines") {
  const auto lines = read_token_lines("a b  c\n\n d\n");
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == std::vector<std::string>{"a", "b", "c"});
  CHECK(flatten(lines).size() == 4);
}
