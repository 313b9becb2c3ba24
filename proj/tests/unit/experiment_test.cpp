#include <filesystem>

#include <doctest.h>

#include "polyparse/error.hpp"
#include "polyparse/experiment.hpp"
#include "polyparse/synth.hpp"

using namespace polyparse;

namespace {

nlohmann::json base_config() {
  return {{"languages", {{"en", {{"text", "en.txt"}, {"train", "en.conllu"}}}, {"cx", {{"text", "cx.txt"}, {"train", "cx.conllu"}, {"test", "cx.test.conllu"}}}}},
          {"target", "cx"},
          {"hub", "en"},
          {"conditions", {"mono", "hub"}},
          {"sweep", {0, 10}},
          {"seeds", {1, 2}}};
}

std::vector<std::vector<std::string>> text_of(const Treebank& tb) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : tb.sentences) out.push_back(s.tokens);
  return out;
}

}  // namespace

TEST_CASE("experiment config parses and hashes stably") {
  const ExperimentConfig c = ExperimentConfig::from_json(base_config(), false);
  CHECK(c.target == "cx");
  CHECK(c.sweep == std::vector<std::size_t>{0, 10});
  CHECK(c.hash() == ExperimentConfig::from_json(c.to_json(), false).hash());
  nlohmann::json j = base_config();
  j["seeds"] = {1, 3};
  CHECK(ExperimentConfig::from_json(j, false).hash() != c.hash());
}

TEST_CASE("experiment config rejects bad input") {
  auto rejects = [](nlohmann::json j) { CHECK_THROWS_AS(ExperimentConfig::from_json(j, false), ConfigError); };
  nlohmann::json j = base_config();
  j["sweeep"] = {1};
  rejects(j);
  j = base_config();
  j["conditions"] = {"mono", "zero-shot"};
  rejects(j);
  j = base_config();
  j["target"] = "de";
  rejects(j);
  j = base_config();
  j["conditions"] = {"related"};
  rejects(j);
  j = base_config();
  j["parser"] = {{"batch_size", 3}};
  rejects(j);
  j = base_config();
  j["lm"] = {{"lstm_sise", 3}};
  rejects(j);
  // Paths are checked only when asked.
  CHECK_THROWS_AS(ExperimentConfig::from_json(base_config(), true), ConfigError);
}

TEST_CASE("cache keys ignore language order") {
  CHECK(lm_cache_key({"en", "cx"}) == "cx,en");
  CHECK(lm_cache_key({"cx", "en"}) == lm_cache_key({"en", "cx"}));
  CHECK(lm_cache_key({"cx"}) == "cx");
}

TEST_CASE("tsv layout") {
  CHECK(simulation_tsv_header("ff") == "# config-hash ff\ncondition\tD_tau\tseed\tUAS\tLAS\n");
  SimulationRow r{"hub", 10, 2, {81.25, 70.5, 100}};
  CHECK(simulation_tsv_row(r) == "hub\t10\t2\t81.25\t70.50\n");
}

TEST_CASE("a tiny sweep runs every cell and skips mono without target trees") {
  const synth::Cipher cipher(3);
  const Treebank en = synth::generate(60, 1);
  const Treebank cx_all = cipher.treebank(synth::generate(60, 2), "cx");
  std::map<std::string, LanguageData> data;
  data["en"] = {text_of(en), en, synth::generate(10, 3), {}};
  data["cx"] = {text_of(cx_all), cx_all, {}, cipher.treebank(synth::generate(10, 4), "cx")};

  nlohmann::json j = base_config();
  j["lm"] = {{"lstm_size", 8}, {"projection_size", 4}, {"filters", {{1, 4}, {2, 4}}}, {"char_dim", 4}, {"epochs", 1}};
  j["parser"] = {{"lstm_size", 8}, {"lstm_layers", 1}, {"arc_mlp", 8}, {"label_mlp", 4},
                 {"epochs", 1},    {"batch_size", 8},  {"patience", 1}};
  const ExperimentConfig cfg = ExperimentConfig::from_json(j, false);

  const std::string tsv = (std::filesystem::temp_directory_path() / "polyparse_sim.tsv").string();
  LmCache cache;
  SimulationOptions opts;
  opts.lm_cache = &cache;
  opts.tsv_path = tsv;
  const SimulationResult r = run_simulation(cfg, data, opts);
  // hub at 0 and 10, mono at 10, for two seeds.
  CHECK(r.rows.size() == 6);
  REQUIRE(r.notes.size() == 1);
  CHECK(r.notes[0].find("mono") != std::string::npos);
  CHECK(cache.count("cx"));
  CHECK(cache.count("cx,en"));
  for (const auto& row : r.rows) {
    CHECK(row.scores.tokens == data["cx"].test.token_count());
    CHECK(row.scores.las <= row.scores.uas);
  }
  const std::string written = read_file(tsv);
  std::filesystem::remove(tsv);
  CHECK(written.rfind(simulation_tsv_header(cfg.hash()), 0) == 0);
  CHECK(written.find("# " + r.notes[0]) != std::string::npos);

  // A second run reuses the cached models and reproduces the numbers.
  const SimulationResult again = run_simulation(cfg, data, opts);
  for (std::size_t i = 0; i < r.rows.size(); ++i) CHECK(again.rows[i].scores.las == r.rows[i].scores.las);
}
