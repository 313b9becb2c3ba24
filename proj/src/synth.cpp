#include "polyparse/synth.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "polyparse/error.hpp"
#include "polyparse/hash.hpp"

namespace polyparse::synth {

namespace {

enum Cat { kPerson, kAnimal, kFood, kPlace, kObject, kTool, kCats };

const char* const kNouns[kCats] = {
    "farmer teacher doctor student baker driver singer painter sailor soldier writer player dancer miner hunter "
    "lawyer nurse pilot friend king",
    "dog cat horse bird cow goat pig rabbit lion tiger snake frog duck monkey bear camel donkey parrot eagle owl",
    "apple bread cake carrot egg banana cookie pear lemon onion melon grape orange nut bean pie olive plum muffin "
    "pepper",
    "house garden river forest park market field school village lake hill farm road island castle station valley "
    "shop kitchen tower",
    "book ball chair table cup bottle hat coat key lamp ring shoe basket letter picture bag clock pen door window",
    "hammer saw rope shovel needle brush ladder bucket drill wrench spoon fork pencil net hook cart wheel nail plow "
    "kettle",
};

struct Verb {
  std::string base, third, past;
  std::vector<Cat> subj, obj;  // obj empty for intransitives
};

const std::vector<Verb>& verbs() {
  static const std::vector<Verb> v = {
      {"eat", "eats", "ate", {kPerson, kAnimal}, {kFood}},
      {"cook", "cooks", "cooked", {kPerson}, {kFood}},
      {"bake", "bakes", "baked", {kPerson}, {kFood}},
      {"taste", "tastes", "tasted", {kPerson, kAnimal}, {kFood}},
      {"buy", "buys", "bought", {kPerson}, {kFood, kObject, kTool}},
      {"sell", "sells", "sold", {kPerson}, {kFood, kObject, kTool}},
      {"want", "wants", "wanted", {kPerson, kAnimal}, {kFood, kObject, kTool}},
      {"like", "likes", "liked", {kPerson, kAnimal}, {kPerson, kAnimal, kFood, kPlace, kObject}},
      {"carry", "carries", "carried", {kPerson, kAnimal}, {kObject, kTool, kFood}},
      {"find", "finds", "found", {kPerson, kAnimal}, {kObject, kTool, kFood}},
      {"see", "sees", "saw", {kPerson, kAnimal}, {kPerson, kAnimal, kPlace, kObject}},
      {"watch", "watches", "watched", {kPerson, kAnimal}, {kPerson, kAnimal}},
      {"paint", "paints", "painted", {kPerson}, {kObject, kPlace}},
      {"clean", "cleans", "cleaned", {kPerson}, {kObject, kTool, kPlace}},
      {"visit", "visits", "visited", {kPerson}, {kPlace, kPerson}},
      {"open", "opens", "opened", {kPerson}, {kObject}},
      {"need", "needs", "needed", {kPerson}, {kTool, kObject, kFood}},
      {"chase", "chases", "chased", {kAnimal, kPerson}, {kAnimal}},
      {"help", "helps", "helped", {kPerson}, {kPerson, kAnimal}},
      {"call", "calls", "called", {kPerson}, {kPerson, kAnimal}},
      {"follow", "follows", "followed", {kPerson, kAnimal}, {kPerson, kAnimal}},
      {"love", "loves", "loved", {kPerson}, {kPerson, kAnimal, kPlace, kFood}},
      {"build", "builds", "built", {kPerson}, {kPlace, kObject, kTool}},
      {"fix", "fixes", "fixed", {kPerson}, {kObject, kTool}},
      {"use", "uses", "used", {kPerson}, {kTool, kObject}},
      {"drop", "drops", "dropped", {kPerson, kAnimal}, {kObject, kTool, kFood}},
      {"feed", "feeds", "fed", {kPerson}, {kAnimal, kPerson}},
      {"hide", "hides", "hid", {kPerson, kAnimal}, {kObject, kTool, kFood}},
      {"wash", "washes", "washed", {kPerson}, {kObject, kTool, kFood, kAnimal}},
      {"leave", "leaves", "left", {kPerson, kAnimal}, {kPlace, kObject}},
      {"sleep", "sleeps", "slept", {kPerson, kAnimal}, {}},
      {"run", "runs", "ran", {kPerson, kAnimal}, {}},
      {"walk", "walks", "walked", {kPerson, kAnimal}, {}},
      {"sing", "sings", "sang", {kPerson}, {}},
      {"dance", "dances", "danced", {kPerson}, {}},
      {"laugh", "laughs", "laughed", {kPerson}, {}},
      {"swim", "swims", "swam", {kPerson, kAnimal}, {}},
      {"jump", "jumps", "jumped", {kPerson, kAnimal}, {}},
      {"wait", "waits", "waited", {kPerson, kAnimal}, {}},
      {"work", "works", "worked", {kPerson}, {}},
      {"rest", "rests", "rested", {kPerson, kAnimal}, {}},
      {"fall", "falls", "fell", {kPerson, kAnimal, kObject, kTool, kFood}, {}},
      {"arrive", "arrives", "arrived", {kPerson}, {}},
      {"smile", "smiles", "smiled", {kPerson}, {}},
      {"hunt", "hunts", "hunted", {kAnimal, kPerson}, {}},
  };
  return v;
}

struct Adjective {
  std::string word;
  std::vector<Cat> cats;
};

const std::vector<Adjective>& adjectives() {
  static const std::vector<Adjective> a = {
      {"young", {kPerson, kAnimal}}, {"old", {kPerson, kAnimal, kPlace, kObject, kTool}},
      {"tall", {kPerson}},           {"happy", {kPerson, kAnimal}},
      {"tired", {kPerson, kAnimal}}, {"clever", {kPerson, kAnimal}},
      {"kind", {kPerson}},           {"angry", {kPerson, kAnimal}},
      {"hungry", {kPerson, kAnimal}}, {"wild", {kAnimal}},
      {"small", {kAnimal, kPlace, kObject, kTool, kFood}}, {"big", {kAnimal, kPlace, kObject, kTool, kFood}},
      {"brown", {kAnimal, kObject}}, {"lazy", {kAnimal, kPerson}},
      {"fresh", {kFood}},            {"sweet", {kFood}},
      {"ripe", {kFood}},             {"sour", {kFood}},
      {"warm", {kFood, kPlace}},     {"quiet", {kPlace, kPerson}},
      {"busy", {kPlace, kPerson}},   {"dark", {kPlace}},
      {"green", {kPlace, kFood}},    {"beautiful", {kPlace, kObject}},
      {"red", {kObject, kFood}},     {"blue", {kObject}},
      {"heavy", {kObject, kTool}},   {"broken", {kObject, kTool}},
      {"new", {kObject, kTool, kPlace}}, {"sharp", {kTool}},
      {"rusty", {kTool}},            {"long", {kTool, kObject}},
      {"useful", {kTool}},           {"strange", {kPerson, kAnimal, kPlace, kObject}},
  };
  return a;
}

struct Preposition {
  std::string word;
  std::vector<Cat> obj;
};

const std::vector<Preposition>& prepositions() {
  static const std::vector<Preposition> p = {
      {"in", {kPlace}},  {"near", {kPlace, kPerson, kAnimal, kObject}}, {"behind", {kObject, kPlace}},
      {"under", {kObject, kTool}}, {"with", {kPerson, kAnimal, kTool}}, {"from", {kPlace, kPerson}},
      {"to", {kPlace, kPerson}},   {"on", {kObject}},  {"at", {kPlace}},
      {"into", {kPlace}},          {"for", {kPerson, kAnimal}},
  };
  return p;
}

const std::vector<std::string> kPresentAdverbs = {"often", "today", "again", "quickly", "slowly", "quietly", "carefully", "always"};
const std::vector<std::string> kPastAdverbs = {"yesterday", "again", "quickly", "slowly", "quietly", "carefully", "happily", "loudly"};
const std::vector<std::string> kNames = {"anna", "ben", "clara", "david", "emma", "frank", "grace", "henry", "iris", "jack",
                                         "kate", "leo", "mia", "noah", "olga", "paul", "rosa", "sam", "tina", "victor"};
const std::vector<std::string> kSgDets = {"the", "a", "this", "that", "every"};
const std::vector<std::string> kPlDets = {"the", "some", "these", "those", "many", "two"};

struct Pronoun {
  std::string subj, obj;
  bool third_singular;
};
const std::vector<Pronoun> kPronouns = {{"he", "him", true},     {"she", "her", true},   {"it", "it", true},
                                        {"they", "them", false}, {"we", "us", false},    {"i", "me", false},
                                        {"you", "you", false}};

std::vector<std::string> split_words(const char* s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

const std::vector<std::vector<std::string>>& nouns() {
  static const std::vector<std::vector<std::string>> n = [] {
    std::vector<std::vector<std::string>> r;
    for (const char* c : kNouns) r.push_back(split_words(c));
    return r;
  }();
  return n;
}

std::string plural(const std::string& n) {
  if (n.back() == 'h' || n.back() == 'x' || n.back() == 's') return n + "es";
  if (n.back() == 'y' && n.size() > 1 && std::string("aeiou").find(n[n.size() - 2]) == std::string::npos)
    return n.substr(0, n.size() - 1) + "ies";
  return n + "s";
}

// Phrase under construction: node heads index into the phrase, -1 marks
// the phrase head (attached later).
struct Node {
  std::string word;
  int head;
  std::string label;
};
struct Phrase {
  std::vector<Node> nodes;
  int head = 0;
};

Phrase single(std::string w) { return {{{std::move(w), -1, ""}}, 0}; }

void attach(Phrase& parent, Phrase child, const std::string& label, bool before) {
  const int pn = static_cast<int>(parent.nodes.size());
  const int cn = static_cast<int>(child.nodes.size());
  const int child_off = before ? 0 : pn;
  const int parent_off = before ? cn : 0;
  std::vector<Node> out;
  out.reserve(static_cast<std::size_t>(pn + cn));
  auto push_child = [&] {
    for (Node n : child.nodes) {
      if (n.head < 0) {
        n.head = parent.head + parent_off;
        n.label = label;
      } else {
        n.head += child_off;
      }
      out.push_back(std::move(n));
    }
  };
  auto push_parent = [&] {
    for (Node n : parent.nodes) {
      if (n.head >= 0) n.head += parent_off;
      out.push_back(std::move(n));
    }
  };
  if (before) {
    push_child();
    push_parent();
  } else {
    push_parent();
    push_child();
  }
  parent.nodes = std::move(out);
  parent.head += parent_off;
}

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  Sentence sentence() {
    Phrase s = clause();
    if (rng_.bernoulli(0.12)) {
      Phrase second = clause();
      attach(second, single("and"), "cc", true);
      attach(s, std::move(second), "conj", false);
    }
    attach(s, single("."), "punct", false);
    Sentence out;
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
      const Node& n = s.nodes[i];
      out.tokens.push_back(n.word);
      out.heads.push_back(n.head < 0 ? 0 : n.head + 1);
      out.labels.push_back(n.head < 0 ? "root" : n.label);
    }
    return out;
  }

 private:
  // Zipfian over list order, so every open class has frequent and rare words.
  template <class T>
  const T& pick(const std::vector<T>& v) {
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) total += 1.0 / static_cast<double>(i + 1);
    double r = rng_.uniform(0.0, total);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      r -= 1.0 / static_cast<double>(i + 1);
      if (r < 0.0) return v[i];
    }
    return v.back();
  }

  // Fixed collocates of `key`: the k candidates with the smallest keyed hash.
  template <class T, class Name>
  static std::vector<T> collocates(const std::string& key, const std::vector<T>& candidates, std::size_t k,
                                   Name name) {
    std::vector<std::pair<std::uint64_t, std::size_t>> order;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      Fnv1a h;
      h.update(key);
      h.update("|");
      h.update(name(candidates[i]));
      order.emplace_back(h.digest(), i);
    }
    std::sort(order.begin(), order.end());
    std::vector<T> out;
    for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back(candidates[order[i].second]);
    return out;
  }

  std::string noun(Cat cat, const std::string& governor) {
    if (!governor.empty() && rng_.bernoulli(0.6)) {
      const auto pref = collocates(governor, nouns()[cat], 3, [](const std::string& w) { return w; });
      return pref[rng_.index(pref.size())];
    }
    return pick(nouns()[cat]);
  }

  // Noun phrase of category `cat`; `third_singular` reports agreement.
  // `governor` is the verb or preposition selecting the noun.
  Phrase noun_phrase(Cat cat, bool allow_pp, bool& third_singular, const std::string& governor) {
    const bool pl = rng_.bernoulli(0.35);
    third_singular = !pl;
    const std::string stem = noun(cat, governor);
    std::vector<Adjective> fitting;
    for (const Adjective& a : adjectives())
      if (std::find(a.cats.begin(), a.cats.end(), cat) != a.cats.end()) fitting.push_back(a);
    const auto favoured = collocates(stem, fitting, 2, [](const Adjective& a) { return a.word; });
    Phrase np = single(pl ? plural(stem) : stem);
    std::vector<std::string> adjs;
    for (int k = 0; k < 2 && !fitting.empty() && rng_.bernoulli(k == 0 ? 0.3 : 0.15); ++k) {
      for (int tries = 0; tries < 8; ++tries) {
        const Adjective& a = rng_.bernoulli(0.7) ? favoured[rng_.index(favoured.size())] : pick(fitting);
        if (std::find(adjs.begin(), adjs.end(), a.word) == adjs.end()) {
          adjs.push_back(a.word);
          break;
        }
      }
    }
    for (auto it = adjs.rbegin(); it != adjs.rend(); ++it) attach(np, single(*it), "amod", true);
    if (rng_.bernoulli(pl ? 0.7 : 0.92)) {
      std::string det = pick(pl ? kPlDets : kSgDets);
      if (det == "a" && std::string("aeiou").find(np.nodes[0].word[0]) != std::string::npos) det = "an";
      attach(np, single(det), "det", true);
    }
    if (allow_pp && rng_.bernoulli(0.1)) attach(np, prep_phrase(), "nmod", false);
    return np;
  }

  Phrase prep_phrase() {
    const Preposition& p = pick(prepositions());
    bool unused = false;
    Phrase pp = noun_phrase(pick(p.obj), false, unused, p.word);
    attach(pp, single(p.word), "case", true);
    return pp;
  }

  Phrase argument(const std::vector<Cat>& cats, bool subject, bool& third_singular, const std::string& governor) {
    const double r = rng_.uniform();
    const bool animate = std::find(cats.begin(), cats.end(), kPerson) != cats.end();
    if (animate && r < 0.12) {
      const Pronoun& p = pick(kPronouns);
      third_singular = p.third_singular;
      return single(subject ? p.subj : p.obj);
    }
    if (animate && r < 0.22) {
      third_singular = true;
      return single(pick(kNames));
    }
    return noun_phrase(pick(cats), true, third_singular, governor);
  }

  Phrase clause() {
    const Verb& v = pick(verbs());
    const bool past = rng_.bernoulli(0.5);
    bool sg = false;
    Phrase subj = argument(v.subj, true, sg, v.base);
    Phrase vp = single(past ? v.past : (sg ? v.third : v.base));
    attach(vp, std::move(subj), "nsubj", true);
    if (!v.obj.empty()) {
      bool unused = false;
      attach(vp, argument(v.obj, false, unused, v.base + "/obj"), "obj", false);
    }
    if (rng_.bernoulli(0.3)) attach(vp, prep_phrase(), "obl", false);
    if (rng_.bernoulli(0.2)) attach(vp, single(pick(past ? kPastAdverbs : kPresentAdverbs)), "advmod", false);
    return vp;
  }

  Rng rng_;
};

}  // namespace

Treebank generate(std::size_t sentences, std::uint64_t seed, const std::string& language) {
  Generator g(seed);
  Treebank tb;
  tb.language = language;
  for (std::size_t i = 0; i < sentences; ++i) {
    Sentence s = g.sentence();
    s.language = language;
    tb.sentences.push_back(std::move(s));
  }
  return tb;
}

std::vector<std::string> lexicon() {
  std::set<std::string> words = {".", "and", "an"};
  for (const auto& cat : nouns())
    for (const auto& n : cat) {
      words.insert(n);
      words.insert(plural(n));
    }
  for (const auto& v : verbs()) words.insert({v.base, v.third, v.past});
  for (const auto& a : adjectives()) words.insert(a.word);
  for (const auto& p : prepositions()) words.insert(p.word);
  for (const auto* list : {&kPresentAdverbs, &kPastAdverbs, &kNames, &kSgDets, &kPlDets}) words.insert(list->begin(), list->end());
  for (const auto& p : kPronouns) words.insert({p.subj, p.obj});
  return {words.begin(), words.end()};
}

Cipher::Cipher(std::uint64_t seed) {
  std::vector<char> to;
  for (char c = 'A'; c <= 'Z'; ++c) to.push_back(c);
  Rng rng(seed);
  rng.shuffle(to);
  for (int i = 0; i < 26; ++i) map_[static_cast<char>('a' + i)] = to[static_cast<std::size_t>(i)];
  map_['.'] = '#';
}

std::string Cipher::word(const std::string& w) const {
  std::string out = w;
  for (char& c : out) {
    auto it = map_.find(c);
    if (it == map_.end()) throw PreconditionError("cipher: unsupported character in '" + w + "'");
    c = it->second;
  }
  return out;
}

Sentence Cipher::sentence(const Sentence& s, const std::string& language) const {
  Sentence out = s;
  out.language = language;
  for (auto& t : out.tokens) t = word(t);
  return out;
}

Treebank Cipher::treebank(const Treebank& tb, const std::string& language) const {
  Treebank out;
  out.language = language;
  out.split = tb.split;
  for (const auto& s : tb.sentences) out.sentences.push_back(sentence(s, language));
  return out;
}

DictionarySplit cipher_dictionaries(const Treebank& corpus, const Cipher& cipher, std::size_t n_train,
                                    std::size_t n_test, int min_count, std::uint64_t seed) {
  std::vector<std::string> tokens;
  for (const auto& s : corpus.sentences) tokens.insert(tokens.end(), s.tokens.begin(), s.tokens.end());
  const auto counts = count_words(tokens);
  std::vector<std::string> candidates;
  for (const auto& [w, c] : counts)
    if (c >= min_count && w != ".") candidates.push_back(w);
  std::sort(candidates.begin(), candidates.end());
  if (candidates.size() < n_train + n_test)
    throw PreconditionError("cipher_dictionaries: need " + std::to_string(n_train + n_test) + " words, corpus has " +
                            std::to_string(candidates.size()));
  Rng rng(seed);
  rng.shuffle(candidates);
  DictionarySplit d;
  d.train.id = "cipher-train-" + std::to_string(seed);
  d.train.split = Split::Train;
  d.test.id = "cipher-test-" + std::to_string(seed);
  d.test.split = Split::Test;
  for (std::size_t i = 0; i < n_train + n_test; ++i) {
    auto& dict = i < n_train ? d.train : d.test;
    dict.pairs.emplace_back(cipher.word(candidates[i]), candidates[i]);
  }
  return d;
}

}  // namespace polyparse::synth
