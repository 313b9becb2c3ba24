#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace polyparse {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Throws PreconditionError naming `what` if any entry is NaN or Inf.
void require_finite(const Matrix& m, const char* what);
bool all_finite(const Matrix& m);

struct Svd {
  Matrix u;  // m x k, orthonormal columns
  Vector s;  // k singular values, descending, nonnegative
  Matrix v;  // n x k, orthonormal columns
};

// Thin SVD (k = min(m, n)) by one-sided Jacobi rotations.
Svd svd(const Matrix& a);

struct LeastSquaresResult {
  Matrix x;
  int rank = 0;
  bool rank_deficient = false;  // minimum-norm solution was returned
};

// X minimizing ||X A - B||_F. A and B must have the same number of columns
// (paired samples). When A lacks full row rank the minimum-norm solution is
// returned and flagged.
LeastSquaresResult least_squares(const Matrix& a, const Matrix& b);

// Random orthogonal matrix (Haar-distributed via QR of a Gaussian matrix).
class Rng;
Matrix random_orthogonal(int n, Rng& rng);

// Seeded generator; identical seeds give bitwise-identical streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  Matrix uniform_matrix(int rows, int cols, double scale);
  Matrix normal_matrix(int rows, int cols, double sd = 1.0);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace polyparse
