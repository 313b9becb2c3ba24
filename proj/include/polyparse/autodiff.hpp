#pragma once

#include <bitset>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "polyparse/numerics.hpp"

namespace polyparse::ad {

// Trainable tensor with an accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  // Gradient accumulators are written by tapes that only hold const access.
  mutable Matrix grad;

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
};

using ParamId = std::size_t;

// Owns a model's parameters; ids stay valid when the set is copied.
class ParameterSet {
 public:
  ParamId add(std::string name, Matrix init);

  Parameter& operator[](ParamId id) { return params_[id]; }
  const Parameter& operator[](ParamId id) const { return params_[id]; }
  std::size_t size() const { return params_.size(); }

  // Returns params_.size() when absent.
  ParamId find(const std::string& name) const;

  void zero_grad();
  std::vector<Parameter*> pointers();
  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, ParamId> by_name_;
};

enum class Primitive {
  Leaf,
  MatMul,
  Transpose,
  Add,
  Sub,
  Mul,
  Scale,
  ScaleBy,
  AddBias,
  Sigmoid,
  Tanh,
  Relu,
  Log,
  Softmax,
  LogSoftmax,
  MaxPool,
  ConcatRows,
  ConcatCols,
  SliceRows,
  SliceCols,
  GatherCols,
  Pick,
  Sum,
  ColumnKron,
  kCount
};

const char* primitive_name(Primitive p);

class PrimitiveSet {
 public:
  static PrimitiveSet all();
  static PrimitiveSet only(std::initializer_list<Primitive> prims);
  bool contains(Primitive p) const { return bits_.test(static_cast<std::size_t>(p)); }

 private:
  std::bitset<static_cast<std::size_t>(Primitive::kCount)> bits_;
};

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

// Receives the gradient flowing into a node's output.
using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

// Reverse-mode recording of matrix operations. A tape is single-owner; build
// one per loss evaluation.
class Tape {
 public:
  // `track_params` = false binds parameters as constants (inference).
  explicit Tape(bool track_params = true, PrimitiveSet allowed = PrimitiveSet::all());

  Var constant(Matrix value);
  // Binds a parameter once per tape; gradients flow into Parameter::grad
  // when the tape tracks parameters.
  Var param(const Parameter& p);

  // Extension point for primitives: throws PreconditionError when `kind` is
  // outside the tape's allowed set or an input belongs to another tape.
  Var record(Primitive kind, Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Primitive kind, Matrix value, const std::vector<Var>& inputs, BackwardFn backward);

  const Matrix& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  // Adds `g` into the gradient of node `id` (no-op for constants).
  template <class Expr>
  void accumulate(int id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }
  Matrix& grad_buffer(int id);

  // Seeds d(loss)/d(loss) = 1 and propagates; parameter gradients are added
  // to Parameter::grad.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Primitive kind = Primitive::Leaf;
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
    const Parameter* param = nullptr;
  };
  Var push(Node node);
  void check_inputs(Primitive kind, const Var* begin, const Var* end) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  bool track_params_;
  PrimitiveSet allowed_;
};

// --- primitives -----------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                   // elementwise
Var scale(Var a, double k);
Var scale_by(Var a, Var s);              // s is 1x1
Var add_bias(Var a, Var bias);           // bias (rows x 1) added to every column
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var log(Var a);
Var softmax(Var a);                      // column-wise
Var log_softmax(Var a);                  // column-wise
// Max over consecutive column segments; output has one column per segment.
Var max_pool(Var a, const std::vector<int>& segment_lengths);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var gather_cols(Var a, const std::vector<int>& cols);
// Column vector of a(r, c) for each (r, c) in `entries`.
Var pick(Var a, const std::vector<std::pair<int, int>>& entries);
Var sum(Var a);
// Per column: kron(a_j, b_j), giving (ra * rb) x cols.
Var column_kron(Var a, Var b);

// --- gradients ------------------------------------------------------------

using LossFn = std::function<Var(Tape&)>;

// Gradient of a scalar loss with respect to each parameter. Parameters the
// loss does not touch get exactly-zero gradients.
std::vector<Matrix> grad(const LossFn& loss, std::span<Parameter* const> params);

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double abs_floor = 1e-5;
  // Checks at most this many entries per parameter (evenly strided); 0 = all.
  std::size_t max_entries_per_param = 0;
};

struct GradCheckFailure {
  std::size_t param_index;
  Eigen::Index entry;
  double analytic;
  double numeric;
  double rel_error;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  std::vector<GradCheckFailure> failures;
  bool passed() const { return failures.empty(); }
};

// Compares tape gradients against central finite differences.
GradCheckReport finite_diff_check(const LossFn& loss, std::span<Parameter* const> params,
                                  const GradCheckOptions& opts = {});

}  // namespace polyparse::ad
