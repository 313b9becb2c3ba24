#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "polyparse/bilm.hpp"
#include "polyparse/corpus.hpp"
#include "polyparse/parser.hpp"

namespace polyparse {

struct LanguagePaths {
  std::string text;  // raw LM text, one sentence per line
  std::string train, dev, test;  // CoNLL-U
};

// A low-resource sweep: for every |D_tau|, condition and seed, downsample
// the target treebank, train a parser and evaluate it on the target test set.
struct ExperimentConfig {
  std::map<std::string, LanguagePaths> languages;
  std::string target;
  std::string hub;      // condition "hub": polyglot LM over target + hub
  std::string related;  // condition "related": polyglot LM over target + related
  std::vector<std::string> conditions = {"mono", "hub", "related"};
  std::vector<std::size_t> sweep = {0, 100, 500, 1000};
  std::vector<std::uint64_t> seeds = {1};
  std::size_t source_size = 0;  // source treebanks downsampled to this many trees (0 = all)
  LmConfig lm;
  ParserConfig parser;
  std::string out_dir = "out";

  // Parses and validates (paths exist, sweep values sane); throws ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j, bool check_paths = true);
  nlohmann::json to_json() const;
  std::string hash() const;
};

ExperimentConfig load_experiment_config(const std::string& path, bool check_paths = true);

struct LanguageData {
  std::vector<std::vector<std::string>> text;
  Treebank train, dev, test;
};

struct SimulationRow {
  std::string condition;
  std::size_t d_tau = 0;
  std::uint64_t seed = 0;
  AttachmentScores scores;
};

struct SimulationResult {
  std::vector<SimulationRow> rows;
  std::vector<std::string> notes;  // skipped cells and why
};

// Language models keyed by the sorted, comma-joined language list.
using LmCache = std::map<std::string, std::shared_ptr<const LMParams>>;
std::string lm_cache_key(std::vector<std::string> languages);

struct SimulationOptions {
  LmCache* lm_cache = nullptr;
  std::string tsv_path;  // rows are flushed here as they complete
  std::function<void(const std::string&)> log;
};

SimulationResult run_simulation(const ExperimentConfig& cfg, const std::map<std::string, LanguageData>& data,
                                const SimulationOptions& opts = {});

std::map<std::string, LanguageData> load_language_data(const ExperimentConfig& cfg);

std::string simulation_tsv_header(const std::string& config_hash);
std::string simulation_tsv_row(const SimulationRow& row);

}  // namespace polyparse
