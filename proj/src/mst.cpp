#include <limits>
#include <vector>

#include "polyparse/error.hpp"
#include "polyparse/parser.hpp"

namespace polyparse {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Nodes on the first cycle of the head graph, or empty when acyclic.
std::vector<int> find_cycle(const std::vector<int>& head) {
  const int n = static_cast<int>(head.size());
  std::vector<int> mark(static_cast<std::size_t>(n), -1);
  for (int start = 1; start < n; ++start) {
    int v = start;
    while (v != 0 && mark[static_cast<std::size_t>(v)] == -1) {
      mark[static_cast<std::size_t>(v)] = start;
      v = head[static_cast<std::size_t>(v)];
    }
    if (v != 0 && mark[static_cast<std::size_t>(v)] == start) {
      std::vector<int> cycle{v};
      for (int u = head[static_cast<std::size_t>(v)]; u != v; u = head[static_cast<std::size_t>(u)]) cycle.push_back(u);
      return cycle;
    }
  }
  return {};
}

}  // namespace

std::vector<int> chu_liu_edmonds(const Matrix& w) {
  const int n = static_cast<int>(w.rows());
  if (w.cols() != n || n < 1) throw PreconditionError("chu_liu_edmonds: expected a square score matrix");
  std::vector<int> head(static_cast<std::size_t>(n), -1);
  for (int d = 1; d < n; ++d) {
    int best = -1;
    for (int h = 0; h < n; ++h) {
      if (h == d) continue;
      if (best < 0 || w(h, d) > w(best, d)) best = h;
    }
    head[static_cast<std::size_t>(d)] = best;
  }
  const std::vector<int> cycle = find_cycle(head);
  if (cycle.empty()) return head;

  std::vector<bool> in_cycle(static_cast<std::size_t>(n), false);
  for (int v : cycle) in_cycle[static_cast<std::size_t>(v)] = true;
  std::vector<int> new_id(static_cast<std::size_t>(n), -1), old_id;
  for (int v = 0; v < n; ++v)
    if (!in_cycle[static_cast<std::size_t>(v)]) {
      new_id[static_cast<std::size_t>(v)] = static_cast<int>(old_id.size());
      old_id.push_back(v);
    }
  const int c = static_cast<int>(old_id.size());
  const int m = c + 1;

  Matrix sub = Matrix::Constant(m, m, kNegInf);
  std::vector<int> enter(static_cast<std::size_t>(m), -1);  // cycle node entered from outside node u
  std::vector<int> leave(static_cast<std::size_t>(m), -1);  // cycle node leaving to outside node v
  for (int a = 0; a < c; ++a) {
    const int u = old_id[static_cast<std::size_t>(a)];
    for (int b = 0; b < c; ++b)
      if (a != b) sub(a, b) = w(u, old_id[static_cast<std::size_t>(b)]);
    double best_in = kNegInf;
    for (int v : cycle) {
      const double s = w(u, v) - w(head[static_cast<std::size_t>(v)], v);
      if (enter[static_cast<std::size_t>(a)] < 0 || s > best_in) {
        best_in = s;
        enter[static_cast<std::size_t>(a)] = v;
      }
    }
    sub(a, c) = best_in;
  }
  for (int b = 1; b < c; ++b) {
    const int v = old_id[static_cast<std::size_t>(b)];
    double best_out = kNegInf;
    for (int u : cycle) {
      if (leave[static_cast<std::size_t>(b)] < 0 || w(u, v) > best_out) {
        best_out = w(u, v);
        leave[static_cast<std::size_t>(b)] = u;
      }
    }
    sub(c, b) = best_out;
  }

  const std::vector<int> sub_head = chu_liu_edmonds(sub);
  for (int b = 1; b < c; ++b) {
    const int h = sub_head[static_cast<std::size_t>(b)];
    head[static_cast<std::size_t>(old_id[static_cast<std::size_t>(b)])] =
        h == c ? leave[static_cast<std::size_t>(b)] : old_id[static_cast<std::size_t>(h)];
  }
  const int from = sub_head[static_cast<std::size_t>(c)];
  head[static_cast<std::size_t>(enter[static_cast<std::size_t>(from)])] = old_id[static_cast<std::size_t>(from)];
  return head;
}

std::vector<int> mst_decode(const Matrix& scores) {
  const Eigen::Index n = scores.cols();
  if (n < 1 || scores.rows() != n + 1) throw PreconditionError("mst_decode: expected (n+1) x n scores, n >= 1");
  require_finite(scores, "arc scores");
  Matrix w = Matrix::Constant(n + 1, n + 1, kNegInf);
  w.rightCols(n) = scores;
  for (Eigen::Index d = 1; d <= n; ++d) w(d, d) = kNegInf;

  auto total = [&](const std::vector<int>& head) {
    double s = 0.0;
    for (Eigen::Index d = 1; d <= n; ++d) s += w(head[static_cast<std::size_t>(d)], d);
    return s;
  };
  auto strip = [](std::vector<int> head) { return std::vector<int>(head.begin() + 1, head.end()); };

  std::vector<int> free_tree = chu_liu_edmonds(w);
  int root_children = 0;
  for (Eigen::Index d = 1; d <= n; ++d) root_children += free_tree[static_cast<std::size_t>(d)] == 0;
  if (root_children == 1) return strip(free_tree);

  std::vector<int> best;
  double best_score = kNegInf;
  for (Eigen::Index r = 1; r <= n; ++r) {
    Matrix wr = w;
    for (Eigen::Index d = 1; d <= n; ++d)
      if (d != r) wr(0, d) = kNegInf;
    std::vector<int> head = chu_liu_edmonds(wr);
    const double s = total(head);
    if (best.empty() || s > best_score) {
      best_score = s;
      best = std::move(head);
    }
  }
  return strip(best);
}

}  // namespace polyparse
