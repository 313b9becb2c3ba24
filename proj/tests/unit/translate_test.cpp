#include <cmath>

#include <doctest.h>

#include "polyparse/error.hpp"
#include "polyparse/translate.hpp"

using namespace polyparse;

namespace {

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Vector angle(double deg) {
  const double r = deg * M_PI / 180.0;
  return v2(std::cos(r), std::sin(r));
}

LayeredEmbedding same_layers(const Vector& v) { return {{v, v, v}}; }

}  // namespace

TEST_CASE("csls matches a hand computation") {
  // Targets at 0 and 90 degrees, sources at 10, 20 and 80 degrees, k = 2.
  const RetrievalIndex idx = build_index({"east", "north"}, {angle(0), angle(90)}, {angle(10), angle(20), angle(80)}, 2);
  const double c10 = std::cos(10 * M_PI / 180), c20 = std::cos(20 * M_PI / 180), c70 = std::cos(70 * M_PI / 180);
  CHECK(idx.r_source(0) == doctest::Approx((c10 + c20) / 2));
  CHECK(idx.r_source(1) == doctest::Approx((c10 + c70) / 2));  // sources sit 80, 70 and 10 degrees from north
  const Vector x = angle(30);
  const double ce = std::cos(30 * M_PI / 180), cn = std::cos(60 * M_PI / 180);
  const double r_t = (ce + cn) / 2;
  const Vector s = csls_scores(x, idx);
  CHECK(s(0) == doctest::Approx(2 * ce - r_t - idx.r_source(0)));
  CHECK(s(1) == doctest::Approx(2 * cn - r_t - idx.r_source(1)));
}

TEST_CASE("csls demotes hubs that cosine prefers") {
  // "hub" is close to every source; "rare" is the true neighbour of q only
  // after correcting for hubness.
  const RetrievalIndex idx =
      build_index({"hub", "rare"}, {angle(45), angle(0)}, {angle(40), angle(45), angle(50), angle(25)}, 2);
  const std::vector<std::pair<std::string, Vector>> q = {{"q", angle(24)}};
  CHECK(translate(q, idx, RetrievalMode::Cosine)[0].candidates[0].word == "hub");
  CHECK(translate(q, idx, RetrievalMode::Csls)[0].candidates[0].word == "rare");
}

TEST_CASE("scores are scale invariant") {
  const RetrievalIndex idx = build_index({"a", "b", "c"}, {v2(1, 0), v2(0, 3), v2(-2, -2)}, {v2(1, 1), v2(0.5, -1)}, 1);
  const Vector a = csls_scores(v2(0.3, 0.7), idx);
  const Vector b = csls_scores(v2(3.0, 7.0), idx);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ties are broken by target word") {
  const RetrievalIndex idx = build_index({"zeta", "alpha", "mid"}, {v2(1, 0), v2(1, 0), v2(0, 1)}, {}, 0);
  const auto r = translate({{"q", v2(1, 0.0)}}, idx, RetrievalMode::Cosine, 3);
  REQUIRE(r[0].candidates.size() == 3);
  CHECK(r[0].candidates[0].word == "alpha");
  CHECK(r[0].candidates[1].word == "zeta");
}

TEST_CASE("index validation") {
  CHECK_THROWS_AS(build_index({"a"}, {v2(0, 0)}, {}, 0), PreconditionError);
  CHECK_THROWS_AS(build_index({"a"}, {v2(1, 0)}, {v2(1, 0)}, 2), PreconditionError);
  CHECK_THROWS_AS(build_index({"a", "b"}, {v2(1, 0)}, {}, 0), PreconditionError);
  const RetrievalIndex cos_only = build_index({"a"}, {v2(1, 0)}, {}, 0);
  CHECK_THROWS(csls_scores(v2(1, 0), cos_only));
  CHECK(cos_only.contains("a"));
  CHECK_FALSE(cos_only.contains("b"));
}

TEST_CASE("precision at 1 accepts any gold target and skips unreachable pairs") {
  const RetrievalIndex idx = build_index({"cat", "dog"}, {v2(1, 0), v2(0, 1)}, {}, 0);
  const auto ranked = translate({{"chat", v2(1, 0.1)}, {"chien", v2(1, 0.2)}, {"oiseau", v2(0, 1)}}, idx,
                                RetrievalMode::Cosine, 1);
  BilingualDictionary test;
  test.pairs = {{"chat", "cat"}, {"chien", "dog"}, {"chien", "hound"}, {"oiseau", "bird"}, {"absent", "cat"}};
  const PrecisionReport r = precision_at_1(ranked, test, &idx);
  CHECK(r.evaluated == 2);
  CHECK(r.skipped == 2);
  CHECK(r.p_at_1 == doctest::Approx(0.5));
}

TEST_CASE("a planted rotation translates perfectly") {
  Rng rng(12);
  const Matrix rot = random_orthogonal(8, rng);
  LayerTable src, tgt;
  BilingualDictionary test;
  for (int i = 0; i < 60; ++i) {
    const Vector x = rng.normal_matrix(8, 1);
    src.add("s" + std::to_string(i), same_layers(x), 1);
    tgt.add("t" + std::to_string(i), same_layers(rot * x), 1);
    test.pairs.emplace_back("s" + std::to_string(i), "t" + std::to_string(i));
  }
  AlignmentMap map;
  map.w = {rot, rot, rot};
  for (RetrievalMode mode : {RetrievalMode::Csls, RetrievalMode::Cosine}) {
    TranslationOptions opts;
    opts.mode = mode;
    const auto rows = evaluate_translation(src, tgt, map, test, opts);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) CHECK(r.precision.p_at_1 >= 0.95);
  }
  // Without the map retrieval is near chance.
  const auto raw = evaluate_translation(src, tgt, AlignmentMap::identity(8), test);
  CHECK(raw[0].precision.p_at_1 < 0.5);
}

TEST_CASE("restricting candidates to the dictionary can only help") {
  Rng rng(13);
  LayerTable src, tgt;
  BilingualDictionary test;
  for (int i = 0; i < 40; ++i) {
    const Vector x = rng.normal_matrix(4, 1);
    src.add("s" + std::to_string(i), same_layers(x + 0.8 * Vector(rng.normal_matrix(4, 1))), 1);
    tgt.add("t" + std::to_string(i), same_layers(x), 1);
    if (i < 10) test.pairs.emplace_back("s" + std::to_string(i), "t" + std::to_string(i));
  }
  TranslationOptions full, restricted;
  restricted.restrict_to_dictionary = true;
  restricted.mode = full.mode = RetrievalMode::Cosine;
  const double a = evaluate_translation(src, tgt, AlignmentMap::identity(4), test, full)[0].precision.p_at_1;
  const double b = evaluate_translation(src, tgt, AlignmentMap::identity(4), test, restricted)[0].precision.p_at_1;
  CHECK(b >= a);
}

TEST_CASE("report layout") {
  LayerReport r;
  r.layer = 1;
  r.method = "csls";
  r.k = 10;
  r.precision = {0.25, 40, 2};
  const std::string tsv = translation_tsv({r}, "abc");
  CHECK(tsv == "# config-hash abc\nlayer\tmethod\tk\tevaluated\tskipped\tp_at_1\n1\tcsls\t10\t40\t2\t0.2500\n");
}
