#include "polyparse/align.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "polyparse/error.hpp"

namespace polyparse {

namespace {

// Kahan-compensated running sum of vectors.
struct KahanSum {
  Vector sum, comp;
  void add(const Vector& v) {
    if (sum.size() == 0) {
      sum = Vector::Zero(v.size());
      comp = Vector::Zero(v.size());
    }
    const Vector y = v - comp;
    const Vector t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

struct WordAccumulator {
  std::array<KahanSum, 3> layers;
  std::int64_t count = 0;
};

}  // namespace

AnchorTable compute_anchors(const LMParams& lm, const std::vector<std::vector<std::string>>& corpus,
                            std::size_t batch) {
  std::vector<std::vector<std::string>> sentences;
  for (const auto& s : corpus)
    if (!s.empty()) sentences.push_back(s);
  if (sentences.empty()) throw PreconditionError("compute_anchors: empty corpus");

  std::map<std::string, WordAccumulator> acc;
  for (std::size_t start = 0; start < sentences.size(); start += batch) {
    const std::size_t end = std::min(sentences.size(), start + batch);
    std::vector<std::vector<std::string>> chunk(sentences.begin() + static_cast<std::ptrdiff_t>(start),
                                                sentences.begin() + static_cast<std::ptrdiff_t>(end));
    const auto out = bilm_forward_batch(lm, chunk, batch);
    for (std::size_t s = 0; s < chunk.size(); ++s) {
      for (std::size_t p = 0; p < chunk[s].size(); ++p) {
        WordAccumulator& a = acc[chunk[s][p]];
        for (int j = 0; j < 3; ++j) a.layers[j].add(out[s][p].layers[j]);
        ++a.count;
      }
    }
  }

  AnchorTable t;
  t.kind = "anchor";
  t.lm_id = lm.id;
  for (auto& [w, a] : acc) {
    LayeredEmbedding e;
    for (int j = 0; j < 3; ++j) e.layers[j] = a.layers[j].sum / static_cast<double>(a.count);
    t.add(w, std::move(e), a.count);
  }
  return t;
}

const char* method_name(AlignMethod m) {
  return m == AlignMethod::Procrustes ? "orthogonal-procrustes" : "least-squares";
}

AlignMethod parse_method(std::string_view s) {
  if (s == "orthogonal-procrustes" || s == "procrustes") return AlignMethod::Procrustes;
  if (s == "least-squares" || s == "lstsq") return AlignMethod::LeastSquares;
  throw PreconditionError("unknown alignment method '" + std::string(s) + "'");
}

AlignmentMap AlignmentMap::identity(int dim) {
  AlignmentMap m;
  for (auto& w : m.w) w = Matrix::Identity(dim, dim);
  return m;
}

bool AlignmentMap::operator==(const AlignmentMap& o) const {
  if (method != o.method || source_language != o.source_language || target_language != o.target_language ||
      dictionary_id != o.dictionary_id || pairs_used != o.pairs_used || pairs_skipped != o.pairs_skipped ||
      rank_deficient != o.rank_deficient)
    return false;
  for (int j = 0; j < 3; ++j)
    if (w[j].rows() != o.w[j].rows() || w[j].cols() != o.w[j].cols() || w[j] != o.w[j]) return false;
  return true;
}

Matrix procrustes(const Matrix& hs, const Matrix& ht) {
  if (hs.rows() != ht.rows() || hs.cols() != ht.cols())
    throw PreconditionError("procrustes: paired matrices must have equal shapes");
  const Svd d = svd(ht * hs.transpose());
  return d.u * d.v.transpose();
}

AlignmentMap fit_alignment(const LayerTable& source, const LayerTable& target, const BilingualDictionary& dict,
                           AlignMethod method) {
  std::vector<std::pair<const LayeredEmbedding*, const LayeredEmbedding*>> usable;
  std::size_t skipped = 0;
  for (const auto& [s, t] : dict.pairs) {
    const LayeredEmbedding* a = source.find(s);
    const LayeredEmbedding* b = target.find(t);
    if (a && b) {
      usable.emplace_back(a, b);
    } else {
      ++skipped;
    }
  }
  if (usable.empty())
    throw PreconditionError("fit_alignment: 0 usable pairs (" + std::to_string(skipped) + " skipped)");

  AlignmentMap map;
  map.method = method;
  map.dictionary_id = dict.id;
  map.pairs_used = usable.size();
  map.pairs_skipped = skipped;
  const auto n = static_cast<Eigen::Index>(usable.size());
  for (int j = 0; j < 3; ++j) {
    const auto ds = usable[0].first->layers[j].size();
    const auto dt = usable[0].second->layers[j].size();
    Matrix hs(ds, n), ht(dt, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      hs.col(k) = usable[static_cast<std::size_t>(k)].first->layers[j];
      ht.col(k) = usable[static_cast<std::size_t>(k)].second->layers[j];
    }
    if (method == AlignMethod::Procrustes) {
      if (ds != dt) throw PreconditionError("fit_alignment: Procrustes needs equal source and target dimensions");
      map.w[j] = procrustes(hs, ht);
    } else {
      LeastSquaresResult r = least_squares(hs, ht);
      map.w[j] = std::move(r.x);
      map.rank_deficient[j] = r.rank_deficient;
    }
  }
  return map;
}

LayeredEmbedding map_layers(const LayeredEmbedding& e, const AlignmentMap& map) {
  LayeredEmbedding out;
  for (int j = 0; j < 3; ++j) {
    if (map.w[j].cols() != e.layers[j].size())
      throw PreconditionError("alignment: layer " + std::to_string(j) + " expects dimension " +
                              std::to_string(map.w[j].cols()) + ", got " + std::to_string(e.layers[j].size()));
    out.layers[j] = map.w[j] * e.layers[j];
  }
  return out;
}

Vector apply_alignment(const LayeredEmbedding& e, const AlignmentMap& map, const ScalarMix& mix) {
  return mix.apply(map_layers(e, map));
}

LayerTable map_table(const LayerTable& t, const AlignmentMap& map) {
  LayerTable out;
  out.kind = t.kind;
  out.lm_id = t.lm_id;
  out.min_count = t.min_count;
  for (std::size_t i = 0; i < t.size(); ++i) out.add(t.words[i], map_layers(t.entries[i], map), t.counts[i]);
  return out;
}

std::string write_alignment(const AlignmentMap& map) {
  std::ostringstream os;
  os << "alignment-map 1\n";
  os << "method " << method_name(map.method) << "\n";
  os << "source " << (map.source_language.empty() ? "-" : map.source_language) << "\n";
  os << "target " << (map.target_language.empty() ? "-" : map.target_language) << "\n";
  os << "dictionary " << (map.dictionary_id.empty() ? "-" : map.dictionary_id) << "\n";
  os << "pairs " << map.pairs_used << " " << map.pairs_skipped << "\n";
  os << std::setprecision(17);
  for (int j = 0; j < 3; ++j) {
    const Matrix& w = map.w[j];
    os << "layer " << j << " " << w.rows() << " " << w.cols() << " " << (map.rank_deficient[j] ? 1 : 0) << "\n";
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) os << (c ? " " : "") << w(r, c);
      os << "\n";
    }
  }
  return os.str();
}

AlignmentMap read_alignment(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  long lineno = 0;
  auto next = [&](const char* what) -> std::istringstream {
    if (!std::getline(is, line)) throw InputError(std::string("alignment map: missing ") + what, lineno + 1);
    ++lineno;
    return std::istringstream(line);
  };
  auto keyed = [&](const char* key) {
    auto ls = next(key);
    std::string k, v;
    ls >> k >> v;
    if (k != key || v.empty()) throw InputError(std::string("alignment map: expected '") + key + "'", lineno);
    return v == "-" ? std::string() : v;
  };

  AlignmentMap m;
  {
    auto ls = next("header");
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != "alignment-map" || version != 1) throw InputError("alignment map: bad header", lineno);
  }
  m.method = parse_method(keyed("method"));
  m.source_language = keyed("source");
  m.target_language = keyed("target");
  m.dictionary_id = keyed("dictionary");
  {
    auto ls = next("pairs");
    std::string k;
    ls >> k >> m.pairs_used >> m.pairs_skipped;
    if (k != "pairs" || !ls) throw InputError("alignment map: expected 'pairs'", lineno);
  }
  for (int j = 0; j < 3; ++j) {
    auto ls = next("layer");
    std::string k;
    int idx = -1, flag = 0;
    Eigen::Index rows = 0, cols = 0;
    ls >> k >> idx >> rows >> cols >> flag;
    if (k != "layer" || idx != j || !ls || rows <= 0 || cols <= 0)
      throw InputError("alignment map: bad layer header", lineno);
    m.rank_deficient[j] = flag != 0;
    m.w[j].resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      auto row = next("matrix row");
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(row >> m.w[j](r, c))) throw InputError("alignment map: short matrix row", lineno);
      std::string extra;
      if (row >> extra) throw InputError("alignment map: long matrix row", lineno);
    }
    if (!all_finite(m.w[j])) throw InputError("alignment map: non-finite entry in layer " + std::to_string(j), lineno);
  }
  return m;
}

}  // namespace polyparse
