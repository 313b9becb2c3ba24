#include "polyparse/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "polyparse/error.hpp"

namespace polyparse {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw PreconditionError(std::string(what) + ": matrix has non-finite entries");
  }
}

namespace {

// Extend the columns of `q` flagged in `filled` to an orthonormal set using
// Gram-Schmidt against standard basis vectors.
void complete_orthonormal(Matrix& q, const std::vector<bool>& filled) {
  const Eigen::Index m = q.rows();
  Eigen::Index basis = 0;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (filled[j]) continue;
    while (basis < m) {
      Vector cand = Vector::Unit(m, basis++);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < q.cols(); ++k) {
          if (k == j || (!filled[k] && k > j)) continue;
          cand -= q.col(k).dot(cand) * q.col(k);
        }
      }
      const double norm = cand.norm();
      if (norm > 1e-6) {
        q.col(j) = cand / norm;
        break;
      }
    }
  }
}

// One-sided Jacobi for m >= n.
Svd jacobi_tall(const Matrix& a) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  Matrix u = a;
  Matrix v = Matrix::Identity(n, n);
  const double eps = std::numeric_limits<double>::epsilon();

  for (int sweep = 0; sweep < 80; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = u.col(p).squaredNorm();
        const double beta = u.col(q).squaredNorm();
        const double gamma = u.col(p).dot(u.col(q));
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index i = 0; i < m; ++i) {
          const double up = u(i, p), uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  Vector sv(n);
  for (Eigen::Index j = 0; j < n; ++j) sv(j) = u.col(j).norm();

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return sv(x) > sv(y); });

  Svd out;
  out.u.resize(m, n);
  out.v.resize(n, n);
  out.s.resize(n);
  const double smax = n > 0 ? sv(order[0]) : 0.0;
  const double cutoff = smax * static_cast<double>(std::max(m, n)) * eps;
  std::vector<bool> filled(n, true);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index j = order[k];
    out.v.col(k) = v.col(j);
    if (sv(j) > cutoff && sv(j) > 0.0) {
      out.s(k) = sv(j);
      out.u.col(k) = u.col(j) / sv(j);
    } else {
      // Numerically null direction: its left vector is not recoverable from
      // the rotated column, so rebuild it orthogonal to the others.
      out.s(k) = 0.0;
      out.u.col(k).setZero();
      filled[k] = false;
    }
  }
  if (std::find(filled.begin(), filled.end(), false) != filled.end()) {
    complete_orthonormal(out.u, filled);
  }
  return out;
}

}  // namespace

Svd svd(const Matrix& a) {
  if (a.size() == 0) throw PreconditionError("svd: empty matrix");
  require_finite(a, "svd");
  if (a.rows() >= a.cols()) return jacobi_tall(a);
  Svd t = jacobi_tall(a.transpose());
  return Svd{std::move(t.v), std::move(t.s), std::move(t.u)};
}

LeastSquaresResult least_squares(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw PreconditionError("least_squares: A has " + std::to_string(a.cols()) +
                            " columns but B has " + std::to_string(b.cols()));
  }
  require_finite(b, "least_squares");
  const Svd d = svd(a);
  const double eps = std::numeric_limits<double>::epsilon();
  const double tol = (d.s.size() ? d.s(0) : 0.0) * static_cast<double>(std::max(a.rows(), a.cols())) * eps;

  int rank = 0;
  Vector inv = Vector::Zero(d.s.size());
  for (Eigen::Index i = 0; i < d.s.size(); ++i) {
    if (d.s(i) > tol) {
      inv(i) = 1.0 / d.s(i);
      ++rank;
    }
  }
  // A = U S V^T, A^+ = V S^+ U^T, X = B A^+.
  LeastSquaresResult r;
  r.x = (b * d.v) * inv.asDiagonal() * d.u.transpose();
  r.rank = rank;
  r.rank_deficient = rank < a.rows();
  return r;
}

Matrix Rng::uniform_matrix(int rows, int cols, double scale) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = uniform(-scale, scale);
  return m;
}

Matrix Rng::normal_matrix(int rows, int cols, double sd) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal(0.0, sd);
  return m;
}

Matrix random_orthogonal(int n, Rng& rng) {
  const Matrix g = rng.normal_matrix(n, n);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i)
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  return q;
}

}  // namespace polyparse
