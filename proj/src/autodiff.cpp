#include "polyparse/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "polyparse/error.hpp"

namespace polyparse::ad {

// --- ParameterSet ---------------------------------------------------------

ParamId ParameterSet::add(std::string name, Matrix init) {
  if (by_name_.count(name)) throw PreconditionError("duplicate parameter name: " + name);
  const ParamId id = params_.size();
  by_name_.emplace(name, id);
  Parameter p{std::move(name), std::move(init), Matrix()};
  p.zero_grad();
  params_.push_back(std::move(p));
  return id;
}

ParamId ParameterSet::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? params_.size() : it->second;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::vector<Parameter*> ParameterSet::pointers() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<Matrix> ParameterSet::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void ParameterSet::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw PreconditionError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) params_[i].value = values[i];
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

// --- PrimitiveSet ---------------------------------------------------------

const char* primitive_name(Primitive p) {
  switch (p) {
    case Primitive::Leaf: return "leaf";
    case Primitive::MatMul: return "matmul";
    case Primitive::Transpose: return "transpose";
    case Primitive::Add: return "add";
    case Primitive::Sub: return "sub";
    case Primitive::Mul: return "mul";
    case Primitive::Scale: return "scale";
    case Primitive::ScaleBy: return "scale_by";
    case Primitive::AddBias: return "add_bias";
    case Primitive::Sigmoid: return "sigmoid";
    case Primitive::Tanh: return "tanh";
    case Primitive::Relu: return "relu";
    case Primitive::Log: return "log";
    case Primitive::Softmax: return "softmax";
    case Primitive::LogSoftmax: return "log_softmax";
    case Primitive::MaxPool: return "max_pool";
    case Primitive::ConcatRows: return "concat_rows";
    case Primitive::ConcatCols: return "concat_cols";
    case Primitive::SliceRows: return "slice_rows";
    case Primitive::SliceCols: return "slice_cols";
    case Primitive::GatherCols: return "gather_cols";
    case Primitive::Pick: return "pick";
    case Primitive::Sum: return "sum";
    case Primitive::ColumnKron: return "column_kron";
    case Primitive::kCount: break;
  }
  return "unknown";
}

PrimitiveSet PrimitiveSet::all() {
  PrimitiveSet s;
  s.bits_.set();
  return s;
}

PrimitiveSet PrimitiveSet::only(std::initializer_list<Primitive> prims) {
  PrimitiveSet s;
  s.bits_.set(static_cast<std::size_t>(Primitive::Leaf));
  for (Primitive p : prims) s.bits_.set(static_cast<std::size_t>(p));
  return s;
}

// --- Tape -----------------------------------------------------------------

const Matrix& Var::value() const { return tape->value(*this); }

Tape::Tape(bool track_params, PrimitiveSet allowed)
    : track_params_(track_params), allowed_(allowed) {
  nodes_.reserve(256);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(const Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{this, it->second};
  Node n;
  n.external = &p.value;
  n.requires_grad = track_params_;
  n.param = track_params_ ? &p : nullptr;
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id);
  return v;
}

void Tape::check_inputs(Primitive kind, const Var* begin, const Var* end) const {
  if (!allowed_.contains(kind)) {
    throw PreconditionError(std::string("unsupported primitive on this tape: ") + primitive_name(kind));
  }
  for (const Var* v = begin; v != end; ++v) {
    if (v->tape != this || v->id < 0 || v->id >= static_cast<int>(nodes_.size())) {
      throw PreconditionError(std::string("input of ") + primitive_name(kind) + " belongs to another tape");
    }
  }
}

Var Tape::record(Primitive kind, Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  check_inputs(kind, inputs.begin(), inputs.end());
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  for (const Var& v : inputs) n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Var Tape::record(Primitive kind, Matrix value, const std::vector<Var>& inputs, BackwardFn backward) {
  check_inputs(kind, inputs.data(), inputs.data() + inputs.size());
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  for (const Var& v : inputs) n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.external ? *n.external : n.value;
}

Matrix& Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Matrix& v = n.external ? *n.external : n.value;
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw PreconditionError("backward: loss belongs to another tape");
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) throw PreconditionError("backward: loss must be 1x1");
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad = Matrix::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) n.param->grad += n.grad;
  }
}

// --- primitives -----------------------------------------------------------

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw PreconditionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw PreconditionError("matmul: inner dimensions " + std::to_string(av.cols()) + " and " +
                            std::to_string(bv.rows()));
  }
  Matrix out;
  out.noalias() = av * bv;
  const int ia = a.id, ib = b.id;
  return t.record(Primitive::MatMul, std::move(out), {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(ia)) tp.grad_buffer(ia).noalias() += g * tp.value(Var{&tp, ib}).transpose();
    if (tp.requires_grad(ib)) tp.grad_buffer(ib).noalias() += tp.value(Var{&tp, ia}).transpose() * g;
  });
}

Var transpose(Var a) {
  const int ia = a.id;
  return a.tape->record(Primitive::Transpose, a.value().transpose(), {a},
                        [ia](Tape& tp, const Matrix& g) { tp.accumulate(ia, g.transpose()); });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  const int ia = a.id, ib = b.id;
  return a.tape->record(Primitive::Add, a.value() + b.value(), {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  const int ia = a.id, ib = b.id;
  return a.tape->record(Primitive::Sub, a.value() - b.value(), {a, b}, [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  const int ia = a.id, ib = b.id;
  return a.tape->record(Primitive::Mul, a.value().cwiseProduct(b.value()), {a, b},
                        [ia, ib](Tape& tp, const Matrix& g) {
                          if (tp.requires_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(Var{&tp, ib})));
                          if (tp.requires_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(Var{&tp, ia})));
                        });
}

Var scale(Var a, double k) {
  const int ia = a.id;
  return a.tape->record(Primitive::Scale, a.value() * k, {a},
                        [ia, k](Tape& tp, const Matrix& g) { tp.accumulate(ia, g * k); });
}

Var scale_by(Var a, Var s) {
  if (s.rows() != 1 || s.cols() != 1) throw PreconditionError("scale_by: scalar must be 1x1");
  const int ia = a.id, is = s.id;
  const double k = s.scalar();
  return a.tape->record(Primitive::ScaleBy, a.value() * k, {a, s}, [ia, is, k](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g * k);
    if (tp.requires_grad(is)) {
      tp.grad_buffer(is)(0, 0) += g.cwiseProduct(tp.value(Var{&tp, ia})).sum();
    }
  });
}

Var add_bias(Var a, Var bias) {
  const Matrix& av = a.value();
  const Matrix& bv = bias.value();
  if (bv.cols() != 1 || bv.rows() != av.rows()) {
    throw PreconditionError("add_bias: bias must be " + std::to_string(av.rows()) + "x1");
  }
  Matrix out = av.colwise() + bv.col(0);
  const int ia = a.id, ib = bias.id;
  return a.tape->record(Primitive::AddBias, std::move(out), {a, bias}, [ia, ib](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g);
    if (tp.requires_grad(ib)) tp.grad_buffer(ib).col(0) += g.rowwise().sum();
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  const int ia = a.id, self = static_cast<int>(a.tape->size());
  return a.tape->record(Primitive::Sigmoid, std::move(out), {a}, [ia, self](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(Var{&tp, self});
    tp.accumulate(ia, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  const int ia = a.id, self = static_cast<int>(a.tape->size());
  return a.tape->record(Primitive::Tanh, std::move(out), {a}, [ia, self](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(Var{&tp, self});
    tp.accumulate(ia, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  const int ia = a.id;
  return a.tape->record(Primitive::Relu, std::move(out), {a}, [ia](Tape& tp, const Matrix& g) {
    const Matrix& x = tp.value(Var{&tp, ia});
    tp.accumulate(ia, (x.array() > 0.0).select(g, 0.0).matrix());
  });
}

Var log(Var a) {
  const Matrix& av = a.value();
  if ((av.array() <= 0.0).any()) throw PreconditionError("log: non-positive input");
  const int ia = a.id;
  return a.tape->record(Primitive::Log, av.array().log().matrix(), {a}, [ia](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, (g.array() / tp.value(Var{&tp, ia}).array()).matrix());
  });
}

Var softmax(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (Eigen::Index j = 0; j < av.cols(); ++j) {
    const double m = av.col(j).maxCoeff();
    out.col(j) = (av.col(j).array() - m).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  const int ia = a.id, self = static_cast<int>(a.tape->size());
  return a.tape->record(Primitive::Softmax, std::move(out), {a}, [ia, self](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(Var{&tp, self});
    Matrix gi(y.rows(), y.cols());
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const double dot = g.col(j).dot(y.col(j));
      gi.col(j) = y.col(j).cwiseProduct((g.col(j).array() - dot).matrix());
    }
    tp.accumulate(ia, gi);
  });
}

Var log_softmax(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (Eigen::Index j = 0; j < av.cols(); ++j) {
    const double m = av.col(j).maxCoeff();
    const double lse = m + std::log((av.col(j).array() - m).exp().sum());
    out.col(j) = (av.col(j).array() - lse).matrix();
  }
  const int ia = a.id, self = static_cast<int>(a.tape->size());
  return a.tape->record(Primitive::LogSoftmax, std::move(out), {a}, [ia, self](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(Var{&tp, self});
    Matrix gi = g;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const double s = g.col(j).sum();
      if (s != 0.0) gi.col(j) -= (y.col(j).array().exp() * s).matrix();
    }
    tp.accumulate(ia, gi);
  });
}

Var max_pool(Var a, const std::vector<int>& segment_lengths) {
  const Matrix& av = a.value();
  const Eigen::Index rows = av.rows();
  Matrix out(rows, static_cast<Eigen::Index>(segment_lengths.size()));
  std::vector<int> argmax(static_cast<std::size_t>(rows) * segment_lengths.size());
  Eigen::Index start = 0;
  for (std::size_t s = 0; s < segment_lengths.size(); ++s) {
    const int len = segment_lengths[s];
    if (len <= 0) throw PreconditionError("max_pool: empty segment");
    for (Eigen::Index r = 0; r < rows; ++r) {
      Eigen::Index best = start;
      for (Eigen::Index c = start + 1; c < start + len; ++c)
        if (av(r, c) > av(r, best)) best = c;
      out(r, static_cast<Eigen::Index>(s)) = av(r, best);
      argmax[s * rows + r] = static_cast<int>(best);
    }
    start += len;
  }
  if (start != av.cols()) throw PreconditionError("max_pool: segments do not cover input columns");
  const int ia = a.id;
  return a.tape->record(Primitive::MaxPool, std::move(out), {a},
                        [ia, argmax = std::move(argmax), rows](Tape& tp, const Matrix& g) {
                          Matrix& ga = tp.grad_buffer(ia);
                          for (Eigen::Index s = 0; s < g.cols(); ++s)
                            for (Eigen::Index r = 0; r < rows; ++r)
                              ga(r, argmax[static_cast<std::size_t>(s * rows + r)]) += g(r, s);
                        });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw PreconditionError("concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw PreconditionError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.id, p.rows());
    r += p.rows();
  }
  return parts[0].tape->record(Primitive::ConcatRows, std::move(out), parts,
                               [spans = std::move(spans)](Tape& tp, const Matrix& g) {
                                 Eigen::Index off = 0;
                                 for (const auto& [id, n] : spans) {
                                   tp.accumulate(id, g.middleRows(off, n));
                                   off += n;
                                 }
                               });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw PreconditionError("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw PreconditionError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    spans.emplace_back(p.id, p.cols());
    c += p.cols();
  }
  return parts[0].tape->record(Primitive::ConcatCols, std::move(out), parts,
                               [spans = std::move(spans)](Tape& tp, const Matrix& g) {
                                 Eigen::Index off = 0;
                                 for (const auto& [id, n] : spans) {
                                   tp.accumulate(id, g.middleCols(off, n));
                                   off += n;
                                 }
                               });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw PreconditionError("slice_rows: out of range");
  const int ia = a.id;
  return a.tape->record(Primitive::SliceRows, a.value().middleRows(start, count), {a},
                        [ia, start, count](Tape& tp, const Matrix& g) {
                          if (tp.requires_grad(ia)) tp.grad_buffer(ia).middleRows(start, count) += g;
                        });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw PreconditionError("slice_cols: out of range");
  const int ia = a.id;
  return a.tape->record(Primitive::SliceCols, a.value().middleCols(start, count), {a},
                        [ia, start, count](Tape& tp, const Matrix& g) {
                          if (tp.requires_grad(ia)) tp.grad_buffer(ia).middleCols(start, count) += g;
                        });
}

Var gather_cols(Var a, const std::vector<int>& cols) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0 || cols[j] >= av.cols()) throw PreconditionError("gather_cols: index out of range");
    out.col(static_cast<Eigen::Index>(j)) = av.col(cols[j]);
  }
  const int ia = a.id;
  return a.tape->record(Primitive::GatherCols, std::move(out), {a}, [ia, cols](Tape& tp, const Matrix& g) {
    if (!tp.requires_grad(ia)) return;
    Matrix& ga = tp.grad_buffer(ia);
    for (std::size_t j = 0; j < cols.size(); ++j) ga.col(cols[j]) += g.col(static_cast<Eigen::Index>(j));
  });
}

Var pick(Var a, const std::vector<std::pair<int, int>>& entries) {
  const Matrix& av = a.value();
  Matrix out(static_cast<Eigen::Index>(entries.size()), 1);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto [r, c] = entries[k];
    if (r < 0 || r >= av.rows() || c < 0 || c >= av.cols()) throw PreconditionError("pick: index out of range");
    out(static_cast<Eigen::Index>(k), 0) = av(r, c);
  }
  const int ia = a.id;
  return a.tape->record(Primitive::Pick, std::move(out), {a}, [ia, entries](Tape& tp, const Matrix& g) {
    if (!tp.requires_grad(ia)) return;
    Matrix& ga = tp.grad_buffer(ia);
    for (std::size_t k = 0; k < entries.size(); ++k)
      ga(entries[k].first, entries[k].second) += g(static_cast<Eigen::Index>(k), 0);
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const int ia = a.id;
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape->record(Primitive::Sum, std::move(out), {a}, [ia, r, c](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var column_kron(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) throw PreconditionError("column_kron: column mismatch");
  const Eigen::Index ra = av.rows(), rb = bv.rows();
  Matrix out(ra * rb, av.cols());
  for (Eigen::Index j = 0; j < av.cols(); ++j)
    for (Eigen::Index i = 0; i < ra; ++i) out.col(j).segment(i * rb, rb) = av(i, j) * bv.col(j);
  const int ia = a.id, ib = b.id;
  return a.tape->record(Primitive::ColumnKron, std::move(out), {a, b}, [ia, ib, ra, rb](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(Var{&tp, ia});
    const Matrix& bv = tp.value(Var{&tp, ib});
    const bool ga_on = tp.requires_grad(ia), gb_on = tp.requires_grad(ib);
    Matrix* ga = ga_on ? &tp.grad_buffer(ia) : nullptr;
    Matrix* gb = gb_on ? &tp.grad_buffer(ib) : nullptr;
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      for (Eigen::Index i = 0; i < ra; ++i) {
        const auto seg = g.col(j).segment(i * rb, rb);
        if (ga) (*ga)(i, j) += seg.dot(bv.col(j));
        if (gb) gb->col(j) += av(i, j) * seg;
      }
    }
  });
}

// --- gradients ------------------------------------------------------------

std::vector<Matrix> grad(const LossFn& loss, std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
  Tape tape;
  Var l = loss(tape);
  tape.backward(l);
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (Parameter* p : params) out.push_back(p->grad);
  return out;
}

namespace {

double eval_loss(const LossFn& loss) {
  Tape tape(false);
  Var l = loss(tape);
  if (l.rows() != 1 || l.cols() != 1) throw PreconditionError("finite_diff_check: loss must be 1x1");
  return l.scalar();
}

}  // namespace

GradCheckReport finite_diff_check(const LossFn& loss, std::span<Parameter* const> params,
                                  const GradCheckOptions& opts) {
  if (!(opts.step > 0.0) || !std::isfinite(opts.step)) {
    throw PreconditionError("finite_diff_check: step must be positive");
  }
  const std::vector<Matrix> analytic = grad(loss, params);
  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Matrix& value = params[pi]->value;
    const Eigen::Index n = value.size();
    Eigen::Index stride = 1;
    if (opts.max_entries_per_param > 0 && static_cast<std::size_t>(n) > opts.max_entries_per_param) {
      stride = n / static_cast<Eigen::Index>(opts.max_entries_per_param);
    }
    for (Eigen::Index e = 0; e < n; e += stride) {
      double* x = value.data() + e;
      const double saved = *x;
      *x = saved + opts.step;
      const double up = eval_loss(loss);
      *x = saved - opts.step;
      const double down = eval_loss(loss);
      *x = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[pi].data()[e];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      report.max_rel_error = std::max(report.max_rel_error, rel);
      ++report.entries_checked;
      if (!(rel <= opts.tolerance)) report.failures.push_back({pi, e, a, numeric, rel});
    }
  }
  return report;
}

}  // namespace polyparse::ad
