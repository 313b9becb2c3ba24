#include "polyparse/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "polyparse/error.hpp"
#include "polyparse/hash.hpp"

namespace polyparse {

namespace {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

const char* const kConditions[] = {"mono", "hub", "related"};

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, bool check_paths) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known = {"languages", "target", "hub",    "related", "conditions", "sweep",
                                                 "seeds",     "source_size", "lm", "parser", "out"};
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown config key '" + k + "'");

  ExperimentConfig c;
  if (!j.contains("languages") || !j.at("languages").is_object() || j.at("languages").empty())
    throw ConfigError("config needs a nonempty 'languages' object");
  for (const auto& [lang, v] : j.at("languages").items()) {
    LanguagePaths p;
    p.text = get_or<std::string>(v, "text", "");
    p.train = get_or<std::string>(v, "train", "");
    p.dev = get_or<std::string>(v, "dev", "");
    p.test = get_or<std::string>(v, "test", "");
    if (check_paths)
      for (const std::string* path : {&p.text, &p.train, &p.dev, &p.test})
        if (!path->empty() && !std::filesystem::exists(*path))
          throw ConfigError("language '" + lang + "': path does not exist: " + *path);
    c.languages[lang] = p;
  }
  c.target = get_or<std::string>(j, "target", "");
  c.hub = get_or<std::string>(j, "hub", "");
  c.related = get_or<std::string>(j, "related", "");
  c.conditions = get_or(j, "conditions", c.conditions);
  c.sweep.clear();
  if (j.contains("sweep")) {
    for (const auto& v : j.at("sweep")) {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("sweep values must be nonnegative integers, got " + v.dump());
      c.sweep.push_back(v.get<std::size_t>());
    }
  } else {
    c.sweep = {0, 100, 500, 1000};
  }
  c.seeds = get_or(j, "seeds", c.seeds);
  c.source_size = get_or<std::size_t>(j, "source_size", 0);
  c.out_dir = get_or<std::string>(j, "out", c.out_dir);
  try {
    if (j.contains("lm")) c.lm = LmConfig::from_json(j.at("lm"));
    if (j.contains("parser")) c.parser = ParserConfig::from_json(j.at("parser"));
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }

  auto need_language = [&](const std::string& role, const std::string& lang) {
    if (lang.empty()) throw ConfigError("config needs '" + role + "'");
    auto it = c.languages.find(lang);
    if (it == c.languages.end()) throw ConfigError(role + " language '" + lang + "' is not under 'languages'");
    return it->second;
  };
  const LanguagePaths& t = need_language("target", c.target);
  if (t.text.empty() || t.train.empty() || t.test.empty())
    throw ConfigError("target language '" + c.target + "' needs text, train and test paths");
  if (c.seeds.empty()) throw ConfigError("config needs at least one seed");
  if (c.sweep.empty()) throw ConfigError("sweep is empty");
  for (const auto& cond : c.conditions) {
    if (std::find(std::begin(kConditions), std::end(kConditions), cond) == std::end(kConditions))
      throw ConfigError("unknown condition '" + cond + "' (mono, hub, related)");
    if (cond == "hub" || cond == "related") {
      const LanguagePaths& s = need_language(cond, cond == "hub" ? c.hub : c.related);
      if (s.text.empty() || s.train.empty())
        throw ConfigError(cond + " language needs text and train paths");
    }
  }
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json langs = nlohmann::json::object();
  for (const auto& [k, p] : languages) langs[k] = {{"text", p.text}, {"train", p.train}, {"dev", p.dev}, {"test", p.test}};
  return {{"languages", langs}, {"target", target},       {"hub", hub},        {"related", related},
          {"conditions", conditions}, {"sweep", sweep},   {"seeds", seeds},    {"source_size", source_size},
          {"lm", lm.to_json()},   {"parser", parser.to_json()}, {"out", out_dir}};
}

std::string ExperimentConfig::hash() const {
  Fnv1a h;
  h.update(to_json().dump());
  return h.hex();
}

ExperimentConfig load_experiment_config(const std::string& path, bool check_paths) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file does not exist: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return ExperimentConfig::from_json(j, check_paths);
}

std::map<std::string, LanguageData> load_language_data(const ExperimentConfig& cfg) {
  std::map<std::string, LanguageData> out;
  for (const auto& [lang, p] : cfg.languages) {
    LanguageData d;
    if (!p.text.empty()) d.text = read_token_lines(read_file(p.text));
    if (!p.train.empty()) d.train = read_conllu(read_file(p.train), lang, Split::Train);
    if (!p.dev.empty()) d.dev = read_conllu(read_file(p.dev), lang, Split::Dev);
    if (!p.test.empty()) d.test = read_conllu(read_file(p.test), lang, Split::Test);
    out[lang] = std::move(d);
  }
  return out;
}

std::string lm_cache_key(std::vector<std::string> languages) {
  std::sort(languages.begin(), languages.end());
  std::string k;
  for (const auto& l : languages) k += (k.empty() ? "" : ",") + l;
  return k;
}

std::string simulation_tsv_header(const std::string& config_hash) {
  return "# config-hash " + config_hash + "\ncondition\tD_tau\tseed\tUAS\tLAS\n";
}

std::string simulation_tsv_row(const SimulationRow& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f\t%.2f", r.scores.uas, r.scores.las);
  return r.condition + "\t" + std::to_string(r.d_tau) + "\t" + std::to_string(r.seed) + "\t" + buf + "\n";
}

SimulationResult run_simulation(const ExperimentConfig& cfg, const std::map<std::string, LanguageData>& data,
                                const SimulationOptions& opts) {
  auto log = [&](const std::string& m) {
    if (opts.log) opts.log(m);
  };
  auto lang = [&](const std::string& l) -> const LanguageData& {
    auto it = data.find(l);
    if (it == data.end()) throw ConfigError("no data for language '" + l + "'");
    return it->second;
  };
  const LanguageData& target = lang(cfg.target);
  const std::size_t max_d = *std::max_element(cfg.sweep.begin(), cfg.sweep.end());
  if (max_d + (max_d + 4) / 5 > target.train.size())
    throw ConfigError("target treebank has " + std::to_string(target.train.size()) + " trees; sweep value " +
                      std::to_string(max_d) + " needs " + std::to_string(max_d + (max_d + 4) / 5));
  if (target.test.empty()) throw ConfigError("target test treebank is empty");

  std::ofstream tsv;
  if (!opts.tsv_path.empty()) {
    tsv.open(opts.tsv_path);
    if (!tsv) throw Error("cannot write " + opts.tsv_path);
    tsv << simulation_tsv_header(cfg.hash()) << std::flush;
  }

  LmCache local_cache;
  LmCache& cache = opts.lm_cache ? *opts.lm_cache : local_cache;
  auto language_model = [&](const std::vector<std::string>& langs) {
    const std::string key = lm_cache_key(langs);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    log("training LM [" + key + "]");
    std::vector<LanguageCorpus> corpora;
    for (const auto& l : langs) corpora.push_back({l, lang(l).text});
    auto lm = std::make_shared<const LMParams>(train_lm(corpora, cfg.lm));
    cache[key] = lm;
    return lm;
  };

  SimulationResult result;
  auto stage = [&](const std::string& name, const auto& fn) {
    try {
      return fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("stage " + name + ": " + e.what());
    }
  };

  for (std::size_t d : cfg.sweep) {
    for (const auto& cond : cfg.conditions) {
      if (cond == "mono" && d == 0) {
        result.notes.push_back("mono skipped at D_tau=0: no target trees to train on");
        continue;
      }
      const std::string other = cond == "hub" ? cfg.hub : cond == "related" ? cfg.related : "";
      std::vector<std::string> langs = {cfg.target};
      if (!other.empty()) langs.push_back(other);
      auto lm = stage("train-lm " + lm_cache_key(langs), [&] { return language_model(langs); });

      for (std::uint64_t seed : cfg.seeds) {
        const std::string cell = cond + ", D_tau=" + std::to_string(d) + ", seed=" + std::to_string(seed);
        const SplitPair split = stage("downsample (" + cell + ")", [&] { return downsample(target.train, {d, seed}); });
        std::vector<Treebank> sources;
        Treebank dev = split.dev;
        if (!other.empty()) {
          const LanguageData& src = lang(other);
          sources.push_back(cfg.source_size > 0 && cfg.source_size < src.train.size()
                                ? subsample(src.train, cfg.source_size, seed)
                                : src.train);
          if (d == 0) {
            // Zero-target: early stopping falls back to the source dev set.
            dev = src.dev.empty() ? Treebank{} : src.dev;
          }
        }
        ParserConfig pc = cfg.parser;
        pc.seed = seed;
        const Embedder emb = Embedder::from_lm(lm);
        log("training parser (" + cell + ")");
        const ParserTrainResult trained =
            stage("train-parser (" + cell + ")", [&] { return train_parser(sources, split.train, dev, emb, pc); });
        SimulationRow row;
        row.condition = cond;
        row.d_tau = d;
        row.seed = seed;
        row.scores = stage("evaluate (" + cell + ")", [&] {
          return evaluate(parse(trained.model, emb, target.test.sentences, true), target.test.sentences);
        });
        log(simulation_tsv_row(row));
        if (tsv) tsv << simulation_tsv_row(row) << std::flush;
        result.rows.push_back(row);
      }
    }
  }
  if (tsv)
    for (const auto& n : result.notes) tsv << "# " << n << "\n";
  return result;
}

}  // namespace polyparse
