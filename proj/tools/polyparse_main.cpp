// polyparse command-line driver.
//
// Exit status: 0 success, 1 invalid configuration / arguments / input files,
// 2 failure while running.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "polyparse/align.hpp"
#include "polyparse/bilm.hpp"
#include "polyparse/decontext.hpp"
#include "polyparse/error.hpp"
#include "polyparse/experiment.hpp"
#include "polyparse/hash.hpp"
#include "polyparse/parser.hpp"
#include "polyparse/runtime.hpp"
#include "polyparse/synth.hpp"
#include "polyparse/translate.hpp"

using namespace polyparse;
namespace fs = std::filesystem;

namespace {

constexpr const char* kConfigEnv = "POLYPARSE_CONFIG";

void info(const std::string& m) { std::cerr << m << "\n"; }

std::string require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + ": no path given");
  if (!fs::exists(path)) throw ConfigError(what + ": file does not exist: " + path);
  return path;
}

void ensure_parent(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

// "lang=path" pairs.
std::pair<std::string, std::string> lang_path(const std::string& arg, const std::string& what) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size())
    throw ConfigError(what + ": expected LANG=PATH, got '" + arg + "'");
  return {arg.substr(0, eq), require_file(arg.substr(eq + 1), what)};
}

Treebank load_treebank(const std::string& arg, Split split, const std::string& what) {
  const auto [lang, path] = lang_path(arg, what);
  try {
    return read_conllu(read_file(path), lang, split);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

// Shared JSON config: "languages" (text/train/dev/test paths), "lm",
// "parser", "alignment". Only sections a command reads are validated.
struct Config {
  nlohmann::json raw = nlohmann::json::object();
  std::string path;

  static Config load(std::string path) {
    Config c;
    if (path.empty()) {
      if (const char* env = std::getenv(kConfigEnv)) path = env;
    }
    if (path.empty()) return c;
    require_file(path, "config");
    c.path = path;
    try {
      c.raw = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(path + ": " + e.what());
    }
    if (!c.raw.is_object()) throw ConfigError(path + ": config must be a JSON object");
    return c;
  }

  LmConfig lm() const {
    try {
      return raw.contains("lm") ? LmConfig::from_json(raw.at("lm")) : LmConfig{};
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config 'lm': ") + e.what());
    }
  }
  ParserConfig parser() const {
    try {
      return raw.contains("parser") ? ParserConfig::from_json(raw.at("parser")) : ParserConfig{};
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config 'parser': ") + e.what());
    }
  }
  std::string text_path(const std::string& lang) const {
    if (!raw.contains("languages") || !raw.at("languages").contains(lang))
      throw ConfigError("config has no entry for language '" + lang + "'");
    const auto& l = raw.at("languages").at(lang);
    if (!l.contains("text")) throw ConfigError("language '" + lang + "' has no 'text' path");
    return require_file(l.at("text").get<std::string>(), "text corpus for '" + lang + "'");
  }
  std::string hash() const {
    Fnv1a h;
    h.update(raw.dump());
    return h.hex();
  }
};

std::vector<std::vector<std::string>> read_corpora(const std::vector<std::string>& paths) {
  std::vector<std::vector<std::string>> out;
  for (const auto& p : paths) {
    auto s = read_token_lines(read_file(require_file(p, "corpus")));
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

std::map<std::string, AlignmentMap> read_maps(const std::vector<std::string>& args) {
  std::map<std::string, AlignmentMap> maps;
  for (const auto& a : args) {
    const auto [lang, path] = lang_path(a, "--map");
    maps[lang] = read_alignment(read_file(path));
  }
  return maps;
}

struct EmbedderArgs {
  std::string lm, vectors;
  std::vector<std::string> maps;

  void add_to(CLI::App* app) {
    app->add_option("--lm", lm, "language model checkpoint");
    app->add_option("--vectors", vectors, "frozen word-vector file (instead of --lm)");
    app->add_option("--map", maps, "LANG=alignment map applied to that language's sentences");
  }
  Embedder build() const {
    if (lm.empty() == vectors.empty()) throw ConfigError("give exactly one of --lm or --vectors");
    if (!vectors.empty()) {
      auto t = std::make_shared<VectorTable>(read_vectors(read_file(require_file(vectors, "--vectors"))));
      return Embedder::from_vectors(t);
    }
    auto model = std::make_shared<const LMParams>(load_lm(require_file(lm, "--lm")));
    return Embedder::from_lm(model, read_maps(maps));
  }
};

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    ensure_parent(path);
    write_file(path, content);
  }
}

}  // namespace

int main(int argc, char** argv) {
  retain_heap_memory();
  CLI::App app{"polyparse: crosslingual language models, alignment, word translation and biaffine parsing"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  bool have_seed = false;
  app.add_option("-c,--config", config_path, std::string("JSON config (default: $") + kConfigEnv + ")");
  app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { seed = s; have_seed = true; },
                                         "override every seed in the config");

  // train-lm
  auto* train_lm_cmd = app.add_subcommand("train-lm", "train a monolingual or polyglot language model");
  std::string lm_langs, lm_out;
  int lm_epochs = -1;
  train_lm_cmd->add_option("--languages", lm_langs, "comma-separated languages (one = monolingual)")->required();
  train_lm_cmd->add_option("--out", lm_out, "checkpoint path")->required();
  train_lm_cmd->add_option("--epochs", lm_epochs, "override the configured epoch count");

  // decontext
  auto* decontext_cmd = app.add_subcommand("decontext", "decontextualized vectors for frequent words");
  std::string dc_lm, dc_out;
  std::vector<std::string> dc_corpus;
  int dc_min = 3;
  bool dc_no_skip = false;
  decontext_cmd->add_option("--lm", dc_lm, "language model checkpoint")->required();
  decontext_cmd->add_option("--corpus", dc_corpus, "token-per-line text file(s)")->required();
  decontext_cmd->add_option("--min-count", dc_min, "frequency threshold");
  decontext_cmd->add_flag("--no-skip", dc_no_skip, "omit the skip connection into layer 2");
  decontext_cmd->add_option("--out", dc_out, "output prefix (.l0 .l1 .l2 .meta)")->required();

  // anchors
  auto* anchors_cmd = app.add_subcommand("anchors", "per-word averages of contextual vectors");
  std::string an_lm, an_out;
  std::vector<std::string> an_corpus;
  anchors_cmd->add_option("--lm", an_lm, "language model checkpoint")->required();
  anchors_cmd->add_option("--corpus", an_corpus, "token-per-line text file(s)")->required();
  anchors_cmd->add_option("--out", an_out, "output prefix (.l0 .l1 .l2 .meta)")->required();

  // align
  auto* align_cmd = app.add_subcommand("align", "fit per-layer maps from source to target tables");
  std::string al_src, al_tgt, al_dict, al_method = "orthogonal-procrustes", al_out, al_src_lang, al_tgt_lang;
  align_cmd->add_option("--source", al_src, "source table prefix")->required();
  align_cmd->add_option("--target", al_tgt, "target table prefix")->required();
  align_cmd->add_option("--dict", al_dict, "training dictionary (source target per line)")->required();
  align_cmd->add_option("--method", al_method, "orthogonal-procrustes | least-squares");
  align_cmd->add_option("--source-lang", al_src_lang, "source language code");
  align_cmd->add_option("--target-lang", al_tgt_lang, "target language code");
  align_cmd->add_option("--out", al_out, "alignment map path")->required();

  // translate-eval
  auto* tr_cmd = app.add_subcommand("translate-eval", "per-layer word translation precision at 1");
  std::string tr_src, tr_tgt, tr_map, tr_dict, tr_mode = "csls", tr_out;
  int tr_k = 10;
  bool tr_restrict = false;
  tr_cmd->add_option("--source", tr_src, "source table prefix")->required();
  tr_cmd->add_option("--target", tr_tgt, "target table prefix")->required();
  tr_cmd->add_option("--map", tr_map, "alignment map (default: identity)");
  tr_cmd->add_option("--dict", tr_dict, "test dictionary")->required();
  tr_cmd->add_option("--mode", tr_mode, "csls | cosine");
  tr_cmd->add_option("--k", tr_k, "CSLS neighbourhood size");
  tr_cmd->add_flag("--restrict-to-dictionary", tr_restrict, "only dictionary targets are candidates");
  tr_cmd->add_option("--out", tr_out, "TSV report (default: stdout)");

  // train-parser
  auto* tp_cmd = app.add_subcommand("train-parser", "train a biaffine parser");
  EmbedderArgs tp_emb;
  tp_emb.add_to(tp_cmd);
  std::vector<std::string> tp_sources;
  std::string tp_target, tp_dev, tp_out;
  tp_cmd->add_option("--source", tp_sources, "LANG=treebank (repeatable)")->required();
  tp_cmd->add_option("--target", tp_target, "LANG=treebank of the target language (omit for zero-target)");
  tp_cmd->add_option("--dev", tp_dev, "LANG=dev treebank for early stopping")->required();
  tp_cmd->add_option("--out", tp_out, "parser checkpoint")->required();

  // parse
  auto* parse_cmd = app.add_subcommand("parse", "parse a CoNLL-U file");
  EmbedderArgs pa_emb;
  pa_emb.add_to(parse_cmd);
  std::string pa_model, pa_input, pa_out;
  bool pa_greedy = false;
  parse_cmd->add_option("--model", pa_model, "parser checkpoint")->required();
  parse_cmd->add_option("--input", pa_input, "LANG=CoNLL-U input (tokens are read; heads replaced)")->required();
  parse_cmd->add_flag("--greedy", pa_greedy, "per-token argmax instead of MST decoding");
  parse_cmd->add_option("--out", pa_out, "CoNLL-U output (default: stdout)");

  // eval-parse
  auto* ev_cmd = app.add_subcommand("eval-parse", "UAS/LAS of predictions against gold");
  std::string ev_pred, ev_gold;
  ev_cmd->add_option("--pred", ev_pred, "predicted CoNLL-U")->required();
  ev_cmd->add_option("--gold", ev_gold, "gold CoNLL-U")->required();

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "low-resource sweep over target treebank sizes");
  std::string sim_out;
  sim_cmd->add_option("--out", sim_out, "output directory (overrides the config)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic treebank and its ciphered twin");
  std::size_t sy_n = 1000;
  std::uint64_t sy_seed = 1, sy_cipher = 7;
  std::string sy_out;
  std::size_t sy_dict_train = 0, sy_dict_test = 0;
  synth_cmd->add_option("--sentences", sy_n, "number of sentences");
  synth_cmd->add_option("--sentence-seed", sy_seed, "grammar sampling seed");
  synth_cmd->add_option("--cipher-seed", sy_cipher, "letter substitution seed");
  synth_cmd->add_option("--dict-train", sy_dict_train, "cipher->plain training pairs to write");
  synth_cmd->add_option("--dict-test", sy_dict_test, "cipher->plain test pairs to write");
  synth_cmd->add_option("--out", sy_out, "output prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const Config cfg = Config::load(config_path);

    if (*train_lm_cmd) {
      LmConfig lc = cfg.lm();
      if (have_seed) lc.seed = seed;
      if (lm_epochs >= 0) lc.epochs = lm_epochs;
      const auto langs = split_list(lm_langs);
      if (langs.empty()) throw ConfigError("--languages is empty");
      std::vector<LanguageCorpus> corpora;
      for (const auto& l : langs) corpora.push_back({l, read_token_lines(read_file(cfg.text_path(l)))});
      LmTrainOptions opts;
      opts.on_epoch = [&](int epoch, double loss, const LMParams& lm) {
        info("epoch " + std::to_string(epoch) + " mean NLL " + std::to_string(loss));
        save_lm(lm_out, lm);  // checkpoint after every epoch
      };
      ensure_parent(lm_out);
      const LMParams lm = train_lm(corpora, lc, opts);
      save_lm(lm_out, lm);
      info("wrote " + lm_out + " (" + lm.id + ", " + std::to_string(lm.vocab.corpus_word_count()) + " words)");
    } else if (*decontext_cmd) {
      const LMParams lm = load_lm(require_file(dc_lm, "--lm"));
      DecontextOptions opts;
      if (dc_no_skip) opts.skip_connections = false;
      const DecontextTable t = decontextualize_vocab(lm, read_corpora(dc_corpus), dc_min, opts);
      ensure_parent(dc_out);
      save_layer_table(dc_out, t);
      info("wrote " + std::to_string(t.size()) + " words to " + dc_out + ".l{0,1,2}");
    } else if (*anchors_cmd) {
      const LMParams lm = load_lm(require_file(an_lm, "--lm"));
      const AnchorTable t = compute_anchors(lm, read_corpora(an_corpus));
      ensure_parent(an_out);
      save_layer_table(an_out, t);
      info("wrote " + std::to_string(t.size()) + " anchors to " + an_out + ".l{0,1,2}");
    } else if (*align_cmd) {
      const AlignMethod method = [&] {
        try {
          return parse_method(al_method);
        } catch (const PreconditionError& e) {
          throw ConfigError(e.what());
        }
      }();
      const LayerTable src = load_layer_table(al_src);
      const LayerTable tgt = load_layer_table(al_tgt);
      BilingualDictionary dict = read_dictionary(read_file(require_file(al_dict, "--dict")));
      dict.id = fs::path(al_dict).filename().string();
      AlignmentMap map = fit_alignment(src, tgt, dict, method);
      map.source_language = al_src_lang;
      map.target_language = al_tgt_lang;
      write_output(al_out, write_alignment(map));
      info("fit " + std::string(method_name(method)) + " on " + std::to_string(map.pairs_used) + " pairs (" +
           std::to_string(map.pairs_skipped) + " skipped)");
    } else if (*tr_cmd) {
      TranslationOptions opts;
      if (tr_mode == "csls") {
        opts.mode = RetrievalMode::Csls;
      } else if (tr_mode == "cosine") {
        opts.mode = RetrievalMode::Cosine;
      } else {
        throw ConfigError("--mode must be csls or cosine");
      }
      opts.k = tr_k;
      opts.restrict_to_dictionary = tr_restrict;
      const LayerTable src = load_layer_table(tr_src);
      const LayerTable tgt = load_layer_table(tr_tgt);
      const AlignmentMap map = tr_map.empty() ? AlignmentMap::identity(src.dim())
                                              : read_alignment(read_file(require_file(tr_map, "--map")));
      const BilingualDictionary test = read_dictionary(read_file(require_file(tr_dict, "--dict")), DictDirection::SourceTarget, Split::Test);
      const auto rows = evaluate_translation(src, tgt, map, test, opts);
      Fnv1a h;
      h.update(cfg.hash());
      for (const auto* s : {&tr_src, &tr_tgt, &tr_map, &tr_dict, &tr_mode}) h.update(*s);
      h.update(std::to_string(tr_k) + (tr_restrict ? "r" : ""));
      write_output(tr_out, translation_tsv(rows, h.hex()));
    } else if (*tp_cmd) {
      ParserConfig pc = cfg.parser();
      if (have_seed) pc.seed = seed;
      std::vector<Treebank> sources;
      for (const auto& s : tp_sources) sources.push_back(load_treebank(s, Split::Train, "--source"));
      const Treebank target = tp_target.empty() ? Treebank{} : load_treebank(tp_target, Split::Train, "--target");
      const Treebank dev = load_treebank(tp_dev, Split::Dev, "--dev");
      const Embedder emb = tp_emb.build();
      ParserTrainOptions opts;
      opts.on_epoch = [](int epoch, double loss, double las) {
        info("epoch " + std::to_string(epoch) + " loss " + std::to_string(loss) + " dev LAS " + std::to_string(las));
      };
      const ParserTrainResult r = train_parser(sources, target, dev, emb, pc, opts);
      ensure_parent(tp_out);
      save_parser(tp_out, r.model);
      info("wrote " + tp_out + " (best dev LAS " + std::to_string(r.best_dev_las) + " at epoch " +
           std::to_string(r.best_epoch) + ")");
    } else if (*parse_cmd) {
      const ParserModel model = load_parser(require_file(pa_model, "--model"));
      const Embedder emb = pa_emb.build();
      if (emb.lm && model.embedder.value("lm_id", emb.lm->id) != emb.lm->id)
        info("warning: parser was trained with LM " + model.embedder.value("lm_id", std::string()) + ", given " + emb.lm->id);
      const Treebank in = load_treebank(pa_input, Split::Test, "--input");
      Treebank out;
      out.language = in.language;
      out.split = in.split;
      out.sentences = parse(model, emb, in.sentences, !pa_greedy);
      write_output(pa_out, write_conllu(out));
    } else if (*ev_cmd) {
      const Treebank pred = read_conllu(read_file(require_file(ev_pred, "--pred")), "pred", Split::Test);
      const Treebank gold = read_conllu(read_file(require_file(ev_gold, "--gold")), "gold", Split::Test);
      const AttachmentScores s = evaluate(pred, gold);
      std::printf("UAS %.2f LAS %.2f\n", s.uas, s.las);
    } else if (*sim_cmd) {
      if (cfg.path.empty()) throw ConfigError("simulate needs -c/--config or $" + std::string(kConfigEnv));
      ExperimentConfig ec = ExperimentConfig::from_json(cfg.raw, true);
      if (have_seed) {
        ec.seeds = {seed};
        ec.lm.seed = seed;
      }
      if (!sim_out.empty()) ec.out_dir = sim_out;
      fs::create_directories(ec.out_dir);
      const auto data = load_language_data(ec);
      SimulationOptions opts;
      opts.tsv_path = (fs::path(ec.out_dir) / "simulation.tsv").string();
      opts.log = [](std::string m) {
        while (!m.empty() && m.back() == '\n') m.pop_back();
        info(m);
      };
      const SimulationResult r = run_simulation(ec, data, opts);
      for (const auto& n : r.notes) info("note: " + n);
      info("wrote " + opts.tsv_path + " (" + std::to_string(r.rows.size()) + " rows)");
    } else if (*synth_cmd) {
      const Treebank plain = synth::generate(sy_n, sy_seed, "en");
      const synth::Cipher cipher(sy_cipher);
      const Treebank ciphered = cipher.treebank(plain, "cx");
      ensure_parent(sy_out);
      auto text = [](const Treebank& tb) {
        std::string s;
        for (const auto& sent : tb.sentences) {
          for (std::size_t i = 0; i < sent.size(); ++i) s += (i ? " " : "") + sent.tokens[i];
          s += "\n";
        }
        return s;
      };
      write_file(sy_out + ".en.conllu", write_conllu(plain));
      write_file(sy_out + ".cx.conllu", write_conllu(ciphered));
      write_file(sy_out + ".en.txt", text(plain));
      write_file(sy_out + ".cx.txt", text(ciphered));
      if (sy_dict_train + sy_dict_test > 0) {
        const auto d = synth::cipher_dictionaries(plain, cipher, sy_dict_train, sy_dict_test, 3, sy_cipher);
        write_file(sy_out + ".dict.train", write_dictionary(d.train));
        write_file(sy_out + ".dict.test", write_dictionary(d.test));
      }
      info("wrote " + sy_out + ".{en,cx}.{conllu,txt}");
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
