#include <functional>
#include <string>
#include <vector>

#include <doctest.h>

#include "polyparse/autodiff.hpp"
#include "polyparse/error.hpp"
#include "polyparse/optim.hpp"

using namespace polyparse;
using ad::Tape;
using ad::Var;

namespace {

// Two free parameters and a fixed readout so every primitive can be checked
// through a scalar loss.
struct Fixture {
  ad::ParameterSet ps;
  Matrix readout;
  Fixture(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    ps.add("a", rng.uniform_matrix(rows, cols, 1.0));
    ps.add("b", rng.uniform_matrix(rows, cols, 1.0));
    readout = rng.uniform_matrix(rows, cols, 1.0);
  }
  ad::GradCheckReport check(const std::function<Var(Tape&, Var, Var)>& f) {
    auto ptrs = ps.pointers();
    return ad::finite_diff_check(
        [&](Tape& t) {
          Var out = f(t, t.param(ps[0]), t.param(ps[1]));
          Matrix r = Matrix::Ones(out.rows(), out.cols());
          if (out.rows() <= readout.rows() && out.cols() <= readout.cols())
            r = readout.topLeftCorner(out.rows(), out.cols());
          return ad::sum(ad::mul(out, t.constant(r)));
        },
        ptrs);
  }
};

}  // namespace

TEST_CASE("every primitive passes a finite-difference check") {
  struct Case {
    const char* name;
    std::function<Var(Tape&, Var, Var)> f;
  };
  const std::vector<Case> cases = {
      {"matmul", [](Tape&, Var a, Var b) { return ad::matmul(a, ad::transpose(b)); }},
      {"add/sub", [](Tape&, Var a, Var b) { return ad::sub(ad::add(a, b), ad::scale(b, 0.3)); }},
      {"mul", [](Tape&, Var a, Var b) { return ad::mul(a, b); }},
      {"scale_by", [](Tape&, Var a, Var b) { return ad::scale_by(a, ad::slice_cols(ad::slice_rows(b, 0, 1), 0, 1)); }},
      {"add_bias", [](Tape&, Var a, Var b) { return ad::add_bias(a, ad::slice_cols(b, 1, 1)); }},
      {"sigmoid", [](Tape&, Var a, Var) { return ad::sigmoid(a); }},
      {"tanh", [](Tape&, Var a, Var) { return ad::tanh(a); }},
      {"relu", [](Tape&, Var a, Var b) { return ad::relu(ad::add(a, ad::scale(b, 0.01))); }},
      {"log", [](Tape&, Var a, Var) { return ad::log(ad::sigmoid(a)); }},
      {"softmax", [](Tape&, Var a, Var) { return ad::softmax(a); }},
      {"log_softmax", [](Tape&, Var a, Var) { return ad::log_softmax(a); }},
      {"max_pool", [](Tape&, Var a, Var) { return ad::max_pool(a, {1, 2}); }},
      {"concat", [](Tape&, Var a, Var b) { return ad::concat_cols({ad::concat_rows({a, b}), ad::concat_rows({b, a})}); }},
      {"gather", [](Tape&, Var a, Var) { return ad::gather_cols(a, {2, 0, 2}); }},
      {"pick", [](Tape&, Var a, Var) { return ad::pick(a, {{0, 0}, {3, 2}, {0, 0}}); }},
      {"column_kron", [](Tape&, Var a, Var b) { return ad::column_kron(ad::slice_rows(a, 0, 2), b); }},
  };
  for (const auto& c : cases) {
    Fixture fx(4, 3, 17);
    const ad::GradCheckReport r = fx.check(c.f);
    CAPTURE(c.name);
    CHECK(r.entries_checked > 0);
    CHECK(r.passed());
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("reused nodes accumulate gradients") {
  ad::ParameterSet ps;
  ps.add("x", Matrix::Constant(1, 1, 3.0));
  auto ptrs = ps.pointers();
  // d/dx (x*x + x) = 2x + 1
  const auto g = ad::grad(
      [&](Tape& t) {
        Var x = t.param(ps[0]);
        return ad::sum(ad::add(ad::mul(x, x), x));
      },
      ptrs);
  CHECK(g[0](0, 0) == doctest::Approx(7.0));
}

TEST_CASE("untouched parameters get exactly zero gradient") {
  ad::ParameterSet ps;
  ps.add("used", Matrix::Ones(2, 2));
  ps.add("unused", Matrix::Ones(3, 1));
  auto ptrs = ps.pointers();
  const auto g = ad::grad([&](Tape& t) { return ad::sum(ad::tanh(t.param(ps[0]))); }, ptrs);
  REQUIRE(g.size() == 2);
  CHECK(g[1].rows() == 3);
  CHECK(g[1].isZero(0.0));
}

TEST_CASE("a restricted tape refuses primitives outside its set") {
  Tape t(true, ad::PrimitiveSet::only({ad::Primitive::MatMul, ad::Primitive::Add}));
  Var a = t.constant(Matrix::Ones(2, 2));
  CHECK_NOTHROW(ad::add(ad::matmul(a, a), a));
  CHECK_THROWS(ad::tanh(a));
}

TEST_CASE("shape mismatches are rejected") {
  Tape t;
  Var a = t.constant(Matrix::Ones(2, 3));
  Var b = t.constant(Matrix::Ones(2, 3));
  CHECK_THROWS(ad::matmul(a, b));
  CHECK_THROWS(ad::add(a, t.constant(Matrix::Ones(3, 2))));
}

TEST_CASE("softmax columns are distributions even for extreme inputs") {
  Tape t;
  Matrix m(3, 2);
  m << 1000, -1000, 0, -1000, -1000, -999;
  const Matrix s = ad::softmax(t.constant(m)).value();
  CHECK(all_finite(s));
  CHECK((s.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  const Matrix ls = ad::log_softmax(t.constant(m)).value();
  CHECK(all_finite(ls));
}

TEST_CASE("parameter sets look up by name and snapshot values") {
  ad::ParameterSet ps;
  const auto id = ps.add("w", Matrix::Ones(2, 2));
  CHECK(ps.find("w") == id);
  CHECK_THROWS(ps.add("w", Matrix::Ones(1, 1)));
  CHECK(ps.scalar_count() == 4);
  const auto snap = ps.snapshot();
  ps[id].value.setZero();
  ps.restore(snap);
  CHECK(ps[id].value == Matrix::Ones(2, 2));
}

TEST_CASE("gradient clipping bounds the joint norm") {
  ad::ParameterSet ps;
  ps.add("a", Matrix::Zero(1, 2));
  ps.add("b", Matrix::Zero(1, 1));
  ps[0].grad = Matrix::Constant(1, 2, 3.0);
  ps[1].grad = Matrix::Constant(1, 1, 4.0);
  const double before = clip_grad_norm(ps, 1.0);
  CHECK(before == doctest::Approx(std::sqrt(34.0)));
  const double after = std::sqrt(ps[0].grad.squaredNorm() + ps[1].grad.squaredNorm());
  CHECK(after == doctest::Approx(1.0));
  // Below the bound nothing changes.
  ps[0].grad = Matrix::Constant(1, 2, 0.1);
  ps[1].grad = Matrix::Constant(1, 1, 0.1);
  clip_grad_norm(ps, 5.0);
  CHECK(ps[1].grad(0, 0) == 0.1);
}

TEST_CASE("adam and adagrad decrease a convex quadratic") {
  for (int which = 0; which < 2; ++which) {
    ad::ParameterSet ps;
    ps.add("x", Matrix::Constant(3, 1, 2.0));
    Adam adam(ps, 0.1);
    Adagrad adagrad(ps, 0.5, 0.1);
    auto ptrs = ps.pointers();
    auto loss = [&](Tape& t) {
      Var x = t.param(ps[0]);
      return ad::sum(ad::mul(x, x));
    };
    const double start = ps[0].value.squaredNorm();
    for (int step = 0; step < 100; ++step) {
      const auto g = ad::grad(loss, ptrs);
      ps[0].grad = g[0];
      if (which == 0) {
        adam.step(ps);
      } else {
        adagrad.step(ps);
      }
    }
    CAPTURE(which);
    CHECK(ps[0].value.squaredNorm() < 0.05 * start);
  }
}
