#include "polyparse/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "polyparse/error.hpp"
#include "polyparse/utf8.hpp"

namespace polyparse {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t end = s.find(sep, start);
    if (end == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_int(std::string_view s, long& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

// --- trees -------------------------------------------------------------------

std::string tree_violation(const std::vector<int>& heads) {
  const int n = static_cast<int>(heads.size());
  for (int i = 0; i < n; ++i) {
    if (heads[i] < 0 || heads[i] > n) return "head out of range at token " + std::to_string(i + 1);
    if (heads[i] == i + 1) return "self-loop at token " + std::to_string(i + 1);
  }
  // Walk from every token towards the root; state 1 = on current path, 2 = reaches root.
  std::vector<int> state(static_cast<std::size_t>(n) + 1, 0);
  state[0] = 2;
  for (int start = 1; start <= n; ++start) {
    std::vector<int> path;
    int v = start;
    while (state[v] == 0) {
      state[v] = 1;
      path.push_back(v);
      v = heads[v - 1];
    }
    if (state[v] == 1) return "cycle through token " + std::to_string(v);
    for (int p : path) state[p] = 2;
  }
  return {};
}

bool is_tree(const std::vector<int>& heads) { return tree_violation(heads).empty(); }

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

std::size_t Treebank::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

// --- CoNLL-U -----------------------------------------------------------------

Treebank read_conllu(std::string_view text, const std::string& language, Split split, const ConlluOptions& opts) {
  utf8::require_valid(text, "conllu");
  Treebank tb;
  tb.language = language;
  tb.split = split;

  Sentence cur;
  cur.language = language;
  long sentence_start = 1;
  std::size_t sentence_index = 0;
  std::string error;
  long error_line = -1;

  auto flush = [&](long line_no) {
    if (cur.tokens.empty() && error.empty()) return;
    if (error.empty()) {
      const std::string why = tree_violation(cur.heads);
      if (!why.empty()) {
        error = (why.rfind("cycle", 0) == 0 ? "cycle at sentence " : "invalid tree at sentence ") +
                std::to_string(sentence_index + 1) + " (" + why + ")";
        error_line = sentence_start;
      }
    }
    if (!error.empty()) {
      if (!opts.skip_invalid) throw InputError(error, error_line);
      if (opts.rejected) opts.rejected->push_back({sentence_index, error_line, error});
    } else {
      tb.sentences.push_back(std::move(cur));
    }
    ++sentence_index;
    cur = Sentence{};
    cur.language = language;
    error.clear();
    error_line = -1;
    sentence_start = line_no + 1;
  };

  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const long line_no = static_cast<long>(li) + 1;
    std::string_view line = lines[li];
    if (line.empty() || line.find_first_not_of(" \t") == std::string_view::npos) {
      flush(line_no);
      continue;
    }
    if (cur.tokens.empty() && error.empty() && line[0] != '#') sentence_start = line_no;
    if (line[0] == '#') continue;
    if (!error.empty()) continue;
    const auto cols = split_on(line, '\t');
    if (cols.size() != 10) {
      error = "expected 10 tab-separated columns, found " + std::to_string(cols.size());
      error_line = line_no;
      continue;
    }
    const std::string_view id = cols[0];
    if (id.find('-') != std::string_view::npos || id.find('.') != std::string_view::npos) continue;
    long idx = 0, head = 0;
    if (!parse_int(id, idx) || idx != static_cast<long>(cur.tokens.size()) + 1) {
      error = "unexpected token id '" + std::string(id) + "'";
      error_line = line_no;
      continue;
    }
    if (!parse_int(cols[6], head)) {
      error = "non-numeric head '" + std::string(cols[6]) + "'";
      error_line = line_no;
      continue;
    }
    cur.tokens.emplace_back(cols[1]);
    cur.heads.push_back(static_cast<int>(head));
    cur.labels.emplace_back(cols[7]);
  }
  flush(static_cast<long>(lines.size()));
  return tb;
}

std::string write_conllu(const Treebank& tb) {
  std::ostringstream out;
  for (const auto& s : tb.sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out << (i + 1) << '\t' << s.tokens[i] << "\t_\t_\t_\t_\t" << s.heads[i] << '\t' << s.labels[i] << "\t_\t_\n";
    }
    out << '\n';
  }
  return out.str();
}

// --- vocabulary --------------------------------------------------------------

Vocabulary::Vocabulary() {
  words_ = {"<unk>", "<s>", "</s>"};
  counts_ = {0, 0, 0};
  chars_ = {"<unk>", "<bow>", "<eow>", "<pad>"};
}

int Vocabulary::word_id(const std::string& w) const {
  auto it = word_index_.find(w);
  return it == word_index_.end() ? kUnkWord : it->second;
}

int Vocabulary::char_id(const std::string& c) const {
  auto it = char_index_.find(c);
  return it == char_index_.end() ? kUnkChar : it->second;
}

std::vector<int> Vocabulary::encode_chars(const std::string& word) const {
  std::vector<int> out;
  for (const auto& cp : utf8::code_points(word)) out.push_back(char_id(cp));
  return out;
}

void Vocabulary::add_word(const std::string& w, std::int64_t count) {
  if (word_index_.count(w)) return;
  word_index_.emplace(w, static_cast<int>(words_.size()));
  words_.push_back(w);
  counts_.push_back(count);
}

void Vocabulary::add_char(const std::string& c) {
  if (char_index_.count(c)) return;
  char_index_.emplace(c, static_cast<int>(chars_.size()));
  chars_.push_back(c);
}

std::unordered_map<std::string, std::int64_t> count_words(const std::vector<std::string>& tokens) {
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& t : tokens) ++counts[t];
  return counts;
}

Vocabulary build_vocab(const std::vector<std::string>& tokens, int min_count) {
  if (min_count < 1) throw PreconditionError("build_vocab: min_count must be >= 1");
  const auto counts = count_words(tokens);
  std::vector<std::pair<std::string, std::int64_t>> kept;
  std::set<std::string> chars;
  for (const auto& [w, c] : counts) {
    if (!utf8::valid(w)) throw InputError("build_vocab: token is not valid UTF-8");
    for (auto& cp : utf8::code_points(w)) chars.insert(cp);
    if (c >= min_count) kept.emplace_back(w, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [w, c] : kept) v.add_word(w, c);
  for (const auto& c : chars) v.add_char(c);
  return v;
}

// --- dictionaries ------------------------------------------------------------

std::vector<std::string> BilingualDictionary::targets_of(const std::string& source) const {
  std::vector<std::string> out;
  for (const auto& [s, t] : pairs)
    if (s == source) out.push_back(t);
  return out;
}

BilingualDictionary read_dictionary(std::string_view text, DictDirection direction, Split split) {
  utf8::require_valid(text, "dictionary");
  BilingualDictionary d;
  d.split = split;
  std::set<std::pair<std::string, std::string>> seen;
  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto fields = split_ws(lines[li]);
    if (fields.empty()) continue;
    if (fields.size() != 2) {
      throw InputError("dictionary: expected 2 fields, found " + std::to_string(fields.size()),
                       static_cast<long>(li) + 1);
    }
    std::pair<std::string, std::string> p{std::string(fields[0]), std::string(fields[1])};
    if (direction == DictDirection::TargetSource) std::swap(p.first, p.second);
    if (seen.insert(p).second) d.pairs.push_back(std::move(p));
  }
  return d;
}

std::string write_dictionary(const BilingualDictionary& dict) {
  std::string out;
  for (const auto& [s, t] : dict.pairs) out += s + ' ' + t + '\n';
  return out;
}

// --- vectors -------------------------------------------------------------------

const Vector* VectorTable::find(const std::string& w) const {
  auto it = index_.find(w);
  return it == index_.end() ? nullptr : &vectors[it->second];
}

void VectorTable::add(std::string w, Vector v) {
  if (words.empty() && dim == 0) dim = static_cast<int>(v.size());
  if (v.size() != dim) throw PreconditionError("VectorTable::add: dimension mismatch for '" + w + "'");
  if (index_.count(w)) throw PreconditionError("VectorTable::add: duplicate word '" + w + "'");
  index_.emplace(w, words.size());
  words.push_back(std::move(w));
  vectors.push_back(std::move(v));
}

VectorTable read_vectors(std::string_view text) {
  utf8::require_valid(text, "vectors");
  const auto lines = split_lines(text);
  if (lines.empty() || split_ws(lines[0]).size() != 2) throw InputError("vectors: missing 'count dim' header", 1);
  const auto header = split_ws(lines[0]);
  long count = 0, dim = 0;
  if (!parse_int(header[0], count) || !parse_int(header[1], dim) || count < 0 || dim <= 0) {
    throw InputError("vectors: malformed header", 1);
  }
  VectorTable t;
  t.dim = static_cast<int>(dim);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_ws(lines[li]);
    if (fields.empty()) continue;
    const long line_no = static_cast<long>(li) + 1;
    if (static_cast<long>(fields.size()) != dim + 1) {
      throw InputError("vectors: expected " + std::to_string(dim) + " values, found " +
                           std::to_string(fields.size() - 1),
                       line_no);
    }
    Vector v(dim);
    for (long k = 0; k < dim; ++k) {
      if (!parse_double(fields[static_cast<std::size_t>(k) + 1], v(k))) throw InputError("vectors: bad number", line_no);
    }
    std::string w(fields[0]);
    if (t.find(w)) throw InputError("vectors: duplicate word '" + w + "'", line_no);
    t.add(std::move(w), std::move(v));
  }
  if (static_cast<long>(t.size()) != count) {
    throw InputError("vectors: header announces " + std::to_string(count) + " rows, found " +
                     std::to_string(t.size()));
  }
  return t;
}

std::string write_vectors(const VectorTable& table, int decimals) {
  std::ostringstream out;
  out << table.size() << ' ' << table.dim << '\n';
  out << std::fixed << std::setprecision(decimals);
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.words[i];
    for (Eigen::Index k = 0; k < table.vectors[i].size(); ++k) {
      double x = table.vectors[i](k);
      if (x == 0.0) x = 0.0;  // no "-0.000000"
      out << ' ' << x;
    }
    out << '\n';
  }
  return out.str();
}

// --- simulation protocols ----------------------------------------------------

SplitPair downsample(const Treebank& tb, const SimulationConfig& cfg) {
  const std::size_t need = cfg.target_train_size + cfg.dev_size();
  if (need > tb.size()) {
    throw PreconditionError("downsample: need " + std::to_string(need) + " sentences (" +
                            std::to_string(cfg.target_train_size) + " train + " + std::to_string(cfg.dev_size()) +
                            " dev) but treebank has " + std::to_string(tb.size()));
  }
  std::vector<std::size_t> order(tb.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);
  rng.shuffle(order);
  SplitPair out;
  out.train.language = out.dev.language = tb.language;
  out.train.split = Split::Train;
  out.dev.split = Split::Dev;
  for (std::size_t i = 0; i < cfg.target_train_size; ++i) out.train.sentences.push_back(tb.sentences[order[i]]);
  for (std::size_t i = 0; i < cfg.dev_size(); ++i)
    out.dev.sentences.push_back(tb.sentences[order[cfg.target_train_size + i]]);
  return out;
}

Treebank subsample(const Treebank& tb, std::size_t n, std::uint64_t seed) {
  if (n > tb.size()) {
    throw PreconditionError("subsample: need " + std::to_string(n) + " sentences but treebank has " +
                            std::to_string(tb.size()));
  }
  std::vector<std::size_t> order(tb.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  order.resize(n);
  std::sort(order.begin(), order.end());
  Treebank out;
  out.language = tb.language;
  out.split = tb.split;
  for (std::size_t i : order) out.sentences.push_back(tb.sentences[i]);
  return out;
}

std::vector<StratifiedBatch> stratified_batches(std::size_t source_size, std::size_t target_size,
                                                std::size_t batch_size, Rng& rng) {
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw PreconditionError("stratified_batches: batch size must be even and >= 2, got " + std::to_string(batch_size));
  }
  std::vector<StratifiedBatch> out;
  if (source_size == 0 && target_size == 0) return out;

  if (source_size == 0 || target_size == 0) {
    const std::size_t n = std::max(source_size, target_size);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t i = 0; i < n; i += batch_size) {
      StratifiedBatch b;
      auto& side = source_size ? b.source : b.target;
      side.assign(order.begin() + static_cast<std::ptrdiff_t>(i),
                  order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
      out.push_back(std::move(b));
    }
    return out;
  }

  const std::size_t half = batch_size / 2;
  const bool source_larger = source_size >= target_size;
  const std::size_t large_n = source_larger ? source_size : target_size;
  const std::size_t small_n = source_larger ? target_size : source_size;
  std::vector<std::size_t> order(large_n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  for (std::size_t i = 0; i < large_n; i += half) {
    const std::size_t take = std::min(half, large_n - i);
    std::vector<std::size_t> large(order.begin() + static_cast<std::ptrdiff_t>(i),
                                   order.begin() + static_cast<std::ptrdiff_t>(i + take));
    std::vector<std::size_t> small(take);
    for (auto& s : small) s = rng.index(small_n);
    StratifiedBatch b;
    if (source_larger) {
      b.source = std::move(large);
      b.target = std::move(small);
    } else {
      b.source = std::move(small);
      b.target = std::move(large);
    }
    out.push_back(std::move(b));
  }
  return out;
}

// --- files ---------------------------------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("write failed: " + path);
}

std::vector<std::vector<std::string>> read_token_lines(std::string_view text) {
  utf8::require_valid(text, "text corpus");
  std::vector<std::vector<std::string>> out;
  for (auto line : split_lines(text)) {
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    std::vector<std::string> s;
    for (auto t : toks) s.emplace_back(t);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> flatten(const std::vector<std::vector<std::string>>& sentences) {
  std::vector<std::string> out;
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace polyparse
