#include <filesystem>

#include <doctest.h>

#include "../support.hpp"
#include "polyparse/decontext.hpp"
#include "polyparse/error.hpp"

using namespace polyparse;
namespace t = polyparse::testing;

namespace {

LMParams random_lm(std::uint64_t seed) {
  LMParams lm = LMParams::init(t::tiny_lm_config(), t::small_vocab(), seed);
  t::randomize(lm.params, seed + 1);
  return lm;
}

}  // namespace

TEST_CASE("decontextualized vectors equal a one-word forward pass") {
  const LMParams lm = random_lm(1);
  for (const char* w : {"the", "cat", "unseen", "x"}) {
    CAPTURE(w);
    CHECK(decontextualize(lm, w) == bilm_forward(lm, {w}).front());
  }
}

TEST_CASE("zero recurrent state reduces the cell to c = i * g") {
  const LMParams lm = random_lm(2);
  const int h = lm.config.lstm_size;
  const int d = lm.config.token_dim();
  const Vector x = char_cnn_encode(lm, "mat");
  const LstmCellParams& cell = lm.cells[kForward][0];
  const Vector z = lm.value(cell.w) * x + lm.value(cell.b);
  auto sig = [](const Vector& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix().eval(); };
  const Vector c = sig(z.segment(0, h)).cwiseProduct(z.segment(2 * h, h).array().tanh().matrix());
  const Vector hidden = sig(z.segment(3 * h, h)).cwiseProduct(c.array().tanh().matrix());
  const Vector expected = lm.value(cell.proj) * hidden;
  const LayeredEmbedding e = decontextualize(lm, "mat");
  CHECK((e.layers[1].head(d) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("the skip flag only changes layer 2") {
  const LMParams lm = random_lm(3);
  DecontextOptions off;
  off.skip_connections = false;
  const LayeredEmbedding a = decontextualize(lm, "dog");
  const LayeredEmbedding b = decontextualize(lm, "dog", off);
  CHECK(a.layers[0] == b.layers[0]);
  CHECK(a.layers[1] == b.layers[1]);
  CHECK(a.layers[2] != b.layers[2]);
}

TEST_CASE("vocabulary pass filters by count and orders by frequency") {
  const LMParams lm = random_lm(4);
  const std::vector<std::vector<std::string>> corpus = {{"b", "a", "b"}, {"c", "b", "a", "a"}, {"d"}};
  const DecontextTable t2 = decontextualize_vocab(lm, corpus, 2);
  CHECK(t2.words == std::vector<std::string>{"a", "b"});
  CHECK(t2.counts == std::vector<std::int64_t>{3, 3});
  CHECK(t2.kind == "decontext");
  CHECK(t2.lm_id == lm.id);
  CHECK(*t2.find("b") == decontextualize(lm, "b"));
  CHECK(decontextualize_vocab(lm, corpus, 1).size() == 4);
  CHECK_THROWS_AS(decontextualize_vocab(lm, corpus, 4), PreconditionError);
  CHECK_THROWS_AS(decontextualize_vocab(lm, {}, 1), PreconditionError);
}

TEST_CASE("layer tables reject duplicates and save to 17 decimals") {
  const LMParams lm = random_lm(5);
  DecontextTable t = decontextualize_vocab(lm, {{"the", "cat", "the"}}, 1);
  CHECK_THROWS(t.add("the", t.entries[0], 1));
  const std::string prefix = (std::filesystem::temp_directory_path() / "polyparse_table").string();
  save_layer_table(prefix, t, 17);
  const LayerTable back = load_layer_table(prefix);
  for (const char* ext : {".l0", ".l1", ".l2", ".meta"}) std::filesystem::remove(prefix + ext);
  CHECK(back.words == t.words);
  CHECK(back.counts == t.counts);
  CHECK(back.lm_id == t.lm_id);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (int j = 0; j < 3; ++j) CHECK((back.entries[i].layers[j] - t.entries[i].layers[j]).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(back.layer(2).find("cat") != nullptr);
  CHECK(back.dim() == lm.layer_dim());
}
