#include "polyparse/translate.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "polyparse/error.hpp"

namespace polyparse {

namespace {

Vector unit(const Vector& v, const char* what) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw PreconditionError(std::string(what) + ": zero or non-finite vector");
  return v / n;
}

Matrix unit_columns(const std::vector<Vector>& vs, const char* what) {
  if (vs.empty()) return Matrix();
  Matrix m(vs[0].size(), static_cast<Eigen::Index>(vs.size()));
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (vs[i].size() != m.rows()) throw PreconditionError(std::string(what) + ": dimension mismatch");
    m.col(static_cast<Eigen::Index>(i)) = unit(vs[i], what);
  }
  return m;
}

// Mean of the k largest entries.
double top_k_mean(const Vector& sims, int k) {
  std::vector<double> v(sims.data(), sims.data() + sims.size());
  std::nth_element(v.begin(), v.begin() + (k - 1), v.end(), std::greater<>());
  std::sort(v.begin(), v.begin() + k, std::greater<>());
  double s = 0.0;
  for (int i = 0; i < k; ++i) s += v[static_cast<std::size_t>(i)];
  return s / k;
}

}  // namespace

bool RetrievalIndex::contains(const std::string& w) const { return set_.count(w) > 0; }

RetrievalIndex build_index(const std::vector<std::string>& target_words, const std::vector<Vector>& target_vectors,
                           const std::vector<Vector>& source_vectors, int k) {
  if (target_words.empty()) throw PreconditionError("retrieval index: no targets");
  if (target_words.size() != target_vectors.size())
    throw PreconditionError("retrieval index: words and vectors differ in count");
  RetrievalIndex idx;
  idx.words = target_words;
  idx.targets = unit_columns(target_vectors, "retrieval target");
  idx.sources = unit_columns(source_vectors, "retrieval source");
  if (!source_vectors.empty()) {
    if (idx.sources.rows() != idx.targets.rows())
      throw PreconditionError("retrieval index: source and target dimensions differ");
    const auto limit = std::min(target_vectors.size(), source_vectors.size());
    if (k < 1 || static_cast<std::size_t>(k) > limit)
      throw PreconditionError("retrieval index: k=" + std::to_string(k) + " outside [1, " + std::to_string(limit) + "]");
    idx.k = k;
    const Matrix sims = idx.targets.transpose() * idx.sources;  // targets x sources
    idx.r_source.resize(sims.rows());
    for (Eigen::Index t = 0; t < sims.rows(); ++t) idx.r_source(t) = top_k_mean(sims.row(t).transpose(), k);
  }
  for (const auto& w : target_words) idx.set_.insert(w);
  return idx;
}

Vector cosine_scores(const Vector& x, const RetrievalIndex& index) {
  if (x.size() != index.targets.rows()) throw PreconditionError("query dimension mismatch");
  return index.targets.transpose() * unit(x, "query");
}

Vector csls_scores(const Vector& x, const RetrievalIndex& index) {
  if (index.k < 1) throw PreconditionError("csls: index built without sources");
  const Vector cos = cosine_scores(x, index);
  const double r_target = top_k_mean(cos, index.k);
  return (2.0 * cos.array() - r_target - index.r_source.array()).matrix();
}

std::vector<RankedList> translate(const std::vector<std::pair<std::string, Vector>>& queries,
                                  const RetrievalIndex& index, RetrievalMode mode, std::size_t top_n) {
  std::vector<RankedList> out;
  out.reserve(queries.size());
  std::vector<std::size_t> order(index.words.size());
  for (const auto& [word, vec] : queries) {
    const Vector s = mode == RetrievalMode::Csls ? csls_scores(vec, index) : cosine_scores(vec, index);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t n = std::min(top_n, order.size());
    auto better = [&](std::size_t a, std::size_t b) {
      const double sa = s(static_cast<Eigen::Index>(a)), sb = s(static_cast<Eigen::Index>(b));
      return sa != sb ? sa > sb : index.words[a] < index.words[b];
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), better);
    RankedList r;
    r.source = word;
    for (std::size_t i = 0; i < n; ++i) r.candidates.push_back({index.words[order[i]], s(static_cast<Eigen::Index>(order[i]))});
    out.push_back(std::move(r));
  }
  return out;
}

PrecisionReport precision_at_1(const std::vector<RankedList>& ranked, const BilingualDictionary& test,
                               const RetrievalIndex* universe) {
  std::unordered_map<std::string, const RankedList*> by_source;
  for (const auto& r : ranked) by_source.emplace(r.source, &r);
  std::vector<std::string> sources;
  std::unordered_map<std::string, std::vector<std::string>> gold;
  for (const auto& [s, t] : test.pairs) {
    if (!gold.count(s)) sources.push_back(s);
    gold[s].push_back(t);
  }

  PrecisionReport rep;
  std::size_t correct = 0;
  for (const auto& s : sources) {
    auto it = by_source.find(s);
    const auto& targets = gold[s];
    const bool reachable = !universe || std::any_of(targets.begin(), targets.end(),
                                                    [&](const std::string& t) { return universe->contains(t); });
    if (it == by_source.end() || !reachable) {
      ++rep.skipped;
      continue;
    }
    ++rep.evaluated;
    const auto& cands = it->second->candidates;
    if (!cands.empty() && std::find(targets.begin(), targets.end(), cands[0].word) != targets.end()) ++correct;
  }
  if (rep.evaluated == 0)
    throw PreconditionError("precision_at_1: 0 evaluable pairs (" + std::to_string(rep.skipped) + " skipped)");
  rep.p_at_1 = static_cast<double>(correct) / static_cast<double>(rep.evaluated);
  return rep;
}

std::vector<LayerReport> evaluate_translation(const LayerTable& source, const LayerTable& target,
                                              const AlignmentMap& map, const BilingualDictionary& test,
                                              const TranslationOptions& opts) {
  if (test.empty()) throw PreconditionError("evaluate_translation: empty test dictionary");
  std::unordered_set<std::string> allowed;
  if (opts.restrict_to_dictionary)
    for (const auto& [s, t] : test.pairs) allowed.insert(t);

  std::vector<LayerReport> out;
  for (int j = 0; j < 3; ++j) {
    std::vector<std::string> tw;
    std::vector<Vector> tv;
    for (std::size_t i = 0; i < target.size(); ++i) {
      if (opts.restrict_to_dictionary && !allowed.count(target.words[i])) continue;
      tw.push_back(target.words[i]);
      tv.push_back(target.entries[i].layers[j]);
    }
    std::vector<Vector> sv;
    sv.reserve(source.size());
    for (const auto& e : source.entries) sv.push_back(map.w[j] * e.layers[j]);

    int k = 0;
    if (opts.mode == RetrievalMode::Csls) k = static_cast<int>(std::min<std::size_t>({static_cast<std::size_t>(opts.k), tw.size(), sv.size()}));
    RetrievalIndex index = build_index(tw, tv, opts.mode == RetrievalMode::Csls ? sv : std::vector<Vector>{}, k);

    std::vector<std::pair<std::string, Vector>> queries;
    std::unordered_set<std::string> seen;
    for (const auto& [s, t] : test.pairs) {
      if (!seen.insert(s).second) continue;
      if (const LayeredEmbedding* e = source.find(s)) queries.emplace_back(s, map.w[j] * e->layers[j]);
    }
    const auto ranked = translate(queries, index, opts.mode, 1);
    LayerReport r;
    r.layer = j;
    r.method = opts.mode == RetrievalMode::Csls ? "csls" : "cosine";
    r.k = k;
    r.precision = precision_at_1(ranked, test, &index);
    out.push_back(r);
  }
  return out;
}

std::string translation_tsv(const std::vector<LayerReport>& rows, const std::string& config_hash) {
  std::ostringstream os;
  os << "# config-hash " << config_hash << "\n";
  os << "layer\tmethod\tk\tevaluated\tskipped\tp_at_1\n";
  for (const auto& r : rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", r.precision.p_at_1);
    os << r.layer << "\t" << r.method << "\t" << r.k << "\t" << r.precision.evaluated << "\t" << r.precision.skipped
       << "\t" << buf << "\n";
  }
  return os.str();
}

}  // namespace polyparse
