#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>

#include <doctest.h>

#include "../support.hpp"
#include "polyparse/error.hpp"
#include "polyparse/parser.hpp"
#include "polyparse/synth.hpp"

using namespace polyparse;
namespace t = polyparse::testing;

namespace {

double tree_score(const Matrix& s, const std::vector<int>& heads) {
  double total = 0.0;
  for (std::size_t d = 0; d < heads.size(); ++d) total += s(heads[d], static_cast<Eigen::Index>(d));
  return total;
}

// Best tree by enumeration; single_root restricts the root to one dependent.
double brute_force_best(const Matrix& s, bool single_root) {
  const int n = static_cast<int>(s.cols());
  std::vector<int> heads(static_cast<std::size_t>(n));
  double best = -1e300;
  const int total = static_cast<int>(std::pow(n + 1, n));
  for (int code = 0; code < total; ++code) {
    int c = code, roots = 0;
    for (int d = 0; d < n; ++d) {
      heads[static_cast<std::size_t>(d)] = c % (n + 1);
      c /= n + 1;
      roots += heads[static_cast<std::size_t>(d)] == 0;
    }
    if ((single_root && roots != 1) || !is_tree(heads)) continue;
    best = std::max(best, tree_score(s, heads));
  }
  return best;
}

int root_children(const std::vector<int>& heads) { return static_cast<int>(std::count(heads.begin(), heads.end(), 0)); }

}  // namespace

TEST_CASE("mst decoding finds the best single-root tree") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(5));
    const Matrix s = rng.normal_matrix(n + 1, n, 1.0);
    const std::vector<int> heads = mst_decode(s);
    CAPTURE(trial);
    REQUIRE(is_tree(heads));
    CHECK(root_children(heads) == 1);
    CHECK(tree_score(s, heads) == doctest::Approx(brute_force_best(s, true)).epsilon(1e-12));
  }
}

TEST_CASE("unconstrained Chu-Liu/Edmonds finds the best arborescence") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(5));
    const Matrix w = rng.normal_matrix(n + 1, n + 1, 1.0);
    const std::vector<int> parent = chu_liu_edmonds(w);
    REQUIRE(parent.size() == static_cast<std::size_t>(n + 1));
    CHECK(parent[0] == -1);
    const std::vector<int> heads(parent.begin() + 1, parent.end());
    REQUIRE(is_tree(heads));
    double score = 0.0;
    for (int d = 1; d <= n; ++d) score += w(parent[static_cast<std::size_t>(d)], d);
    CHECK(score == doctest::Approx(brute_force_best(w.rightCols(n), false)).epsilon(1e-12));
  }
}

TEST_CASE("decoding is deterministic under exact ties") {
  const Matrix s = Matrix::Zero(4, 3);
  const std::vector<int> a = mst_decode(s);
  CHECK(a == mst_decode(s));
  CHECK(is_tree(a));
  CHECK(root_children(a) == 1);
}

TEST_CASE("greedy decoding takes each column's best non-self head") {
  Matrix s(4, 3);
  s << 0, 5, 0,
       1, 0, 9,
       9, 1, 0,
       0, 0, 9;
  // Token 3's self-score (row 3) is ignored; token 1 prefers token 2.
  CHECK(greedy_decode(s) == std::vector<int>{2, 0, 1});
  // When greedy is already a single-root tree, MST agrees with it.
  CHECK(mst_decode(s) == greedy_decode(s));
}

TEST_CASE("biaffine arc scores follow the bilinear form") {
  Rng rng(3);
  const Matrix hh = rng.normal_matrix(4, 3), hd = rng.normal_matrix(4, 2), u = rng.normal_matrix(4, 4);
  const Matrix b = rng.normal_matrix(4, 1);
  ad::Tape tape;
  const Matrix got = biaffine_arc(tape.constant(hh), tape.constant(hd), tape.constant(u), tape.constant(b)).value();
  REQUIRE(got.rows() == 3);
  REQUIRE(got.cols() == 2);
  for (int h = 0; h < 3; ++h)
    for (int d = 0; d < 2; ++d) {
      const double expected = hh.col(h).dot(u * hd.col(d)) + hh.col(h).dot(b.col(0));
      CHECK(got(h, d) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("a sentence encodes the same alone or in a batch") {
  ParserModel m = ParserModel::init(t::tiny_parser_config(), {"a", "b"}, 5, 3, 4);
  t::randomize(m.params, 5);
  Rng rng(6);
  const SentenceFeatures f1 = t::random_features(5, 3, 2, rng), f2 = t::random_features(5, 3, 4, rng);
  ad::Tape tape;
  const Encoded both = encode(tape, m, {&f1, &f2});
  const Encoded alone = encode(tape, m, {&f2});
  CHECK(both.lengths == std::vector<int>{2, 4});
  CHECK(both.offsets == std::vector<int>{0, 3});
  const Matrix a = both.states.value().middleCols(3, 5);
  CHECK((a - alone.states.value()).cwiseAbs().maxCoeff() < 1e-12);
  const MlpOutputs mlp = mlp_outputs(tape, m, both);
  const Matrix s = arc_scores(m, both, mlp, 1).value();
  CHECK(s.rows() == 5);
  CHECK(s.cols() == 4);
}

TEST_CASE("parse loss is a per-token average and validates gold") {
  ParserModel m = ParserModel::init(t::tiny_parser_config(), {"nsubj", "obj", "root"}, 5, 3, 7);
  t::randomize(m.params, 8);
  Rng rng(9);
  const SentenceFeatures f = t::random_features(5, 3, 3, rng);
  const Sentence gold = t::make_sentence({"a", "b", "c"}, {2, 0, 2}, {"nsubj", "root", "obj"});
  ad::Tape tape;
  const ParseLoss one = parse_loss(tape, m, {&f}, {&gold});
  const ParseLoss two = parse_loss(tape, m, {&f, &f}, {&gold, &gold});
  CHECK(one.tokens == 3);
  CHECK(two.tokens == 6);
  CHECK(one.mean.scalar() > 0.0);
  CHECK(two.mean.scalar() == doctest::Approx(one.mean.scalar()).epsilon(1e-12));
  Sentence bad_label = gold;
  bad_label.labels[0] = "xcomp";
  CHECK_THROWS_AS(parse_loss(tape, m, {&f}, {&bad_label}), PreconditionError);
  Sentence cyclic = gold;
  cyclic.heads = {2, 1, 0};
  CHECK_THROWS_AS(parse_loss(tape, m, {&f}, {&cyclic}), PreconditionError);
}

TEST_CASE("parses are trees with known labels") {
  ParserModel m = ParserModel::init(t::tiny_parser_config(), {"nsubj", "obj", "root"}, 5, 3, 10);
  t::randomize(m.params, 11);
  Rng rng(12);
  std::vector<Sentence> sents;
  std::vector<SentenceFeatures> feats;
  for (int n : {1, 2, 5, 9}) {
    sents.push_back(t::make_sentence(std::vector<std::string>(static_cast<std::size_t>(n), "w"),
                                     std::vector<int>(static_cast<std::size_t>(n), 0),
                                     std::vector<std::string>(static_cast<std::size_t>(n), "root")));
    feats.push_back(t::random_features(5, 3, n, rng));
  }
  for (const auto& p : parse_features(m, sents, feats, true)) {
    CHECK(is_tree(p.heads));
    CHECK(root_children(p.heads) == 1);
    for (const auto& l : p.labels) CHECK(m.label_id(l) >= 0);
  }
}

TEST_CASE("attachment scores") {
  const Sentence gold = t::make_sentence({"w", "x", "y", "z"}, {2, 0, 2, 3}, {"nsubj", "root", "obj", "amod"});
  Sentence pred = gold;
  pred.heads = {2, 0, 1, 1};
  pred.labels = {"obj", "root", "obj", "amod"};
  const AttachmentScores s = evaluate(std::vector<Sentence>{pred}, std::vector<Sentence>{gold});
  CHECK(s.uas == 50.0);
  CHECK(s.las == 25.0);
  CHECK(s.tokens == 4);
  CHECK_THROWS(evaluate(std::vector<Sentence>{pred, pred}, std::vector<Sentence>{gold}));
}

TEST_CASE("configuration validation") {
  ParserConfig c;
  CHECK(ParserConfig::from_json(c.to_json()).to_json() == c.to_json());
  nlohmann::json j = c.to_json();
  j["batch_size"] = 7;
  CHECK_THROWS(ParserConfig::from_json(j));
  j = c.to_json();
  j["layers"] = 2;
  CHECK_THROWS_AS(ParserConfig::from_json(j), ConfigError);
}

TEST_CASE("vector embedder zero-fills unknown words") {
  auto table = std::make_shared<VectorTable>();
  table->dim = 2;
  table->add("cat", Vector::Ones(2));
  const Embedder e = Embedder::from_vectors(table);
  CHECK(e.layer_count() == 1);
  const auto f = e.features({t::make_sentence({"cat", "gnu"}, {0, 1}, {"root", "obj"})});
  CHECK(f[0].layers[0].col(0) == Vector::Ones(2));
  CHECK(f[0].layers[0].col(1).isZero());
}

TEST_CASE("LM embedder applies the map of the sentence's language") {
  LMParams lm = LMParams::init(t::tiny_lm_config(), t::small_vocab(), 13);
  t::randomize(lm.params, 14);
  auto shared = std::make_shared<const LMParams>(lm);
  const int d = lm.layer_dim();
  AlignmentMap flip = AlignmentMap::identity(d);
  for (auto& w : flip.w) w *= -1.0;
  const Embedder e = Embedder::from_lm(shared, {{"fr", flip}});
  const Sentence en = t::make_sentence({"the", "cat"}, {2, 0}, {"det", "root"}, "en");
  Sentence fr = en;
  fr.language = "fr";
  const auto f = e.features({en, fr});
  for (int j = 0; j < 3; ++j) CHECK((f[0].layers[j] + f[1].layers[j]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS(Embedder::from_lm(shared, {{"fr", AlignmentMap::identity(d + 1)}}));
  CHECK(e.describe()["lm_id"] == lm.id);
}

TEST_CASE("training memorizes a tiny treebank, stops early and round trips") {
  const Treebank tb = synth::generate(12, 5);
  auto table = std::make_shared<VectorTable>();
  table->dim = 8;
  Rng rng(15);
  for (const auto& s : tb.sentences)
    for (const auto& w : s.tokens)
      if (!table->find(w)) table->add(w, rng.normal_matrix(8, 1).col(0));
  const Embedder emb = Embedder::from_vectors(table);
  ParserConfig cfg = t::tiny_parser_config();
  cfg.lstm_size = 24;
  cfg.lstm_layers = 1;
  cfg.arc_mlp = 24;
  cfg.label_mlp = 12;
  cfg.batch_size = 4;
  cfg.epochs = 60;
  cfg.patience = 5;
  cfg.learning_rate = 5e-3;
  std::vector<double> dev;
  ParserTrainOptions opts;
  opts.on_epoch = [&](int, double, double las) { dev.push_back(las); };
  const ParserTrainResult r = train_parser({tb}, Treebank{}, tb, emb, cfg, opts);
  CHECK(r.epochs_run == static_cast<int>(dev.size()));
  CHECK(r.best_dev_las == *std::max_element(dev.begin(), dev.end()));
  CHECK(r.best_epoch <= r.epochs_run);
  if (r.epochs_run < cfg.epochs) CHECK(r.epochs_run - r.best_epoch == cfg.patience);
  CHECK(r.best_dev_las > 60.0);

  // The returned model is the best snapshot.
  const auto greedy_las = evaluate(parse(r.model, emb, tb.sentences, false), tb.sentences).las;
  CHECK(greedy_las == doctest::Approx(r.best_dev_las));

  const std::string path = (std::filesystem::temp_directory_path() / "polyparse_parser.ckpt").string();
  save_parser(path, r.model);
  const ParserModel back = load_parser(path);
  std::filesystem::remove(path);
  CHECK(parse(back, emb, tb.sentences) == parse(r.model, emb, tb.sentences));
  CHECK(back.labels == r.model.labels);
  CHECK(back.embedder == r.model.embedder);
}
