#pragma once

#include <vector>

#include "polyparse/autodiff.hpp"

namespace polyparse {

// Rescales all gradients so their joint L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(ad::ParameterSet& params, double max_norm);

class Adagrad {
 public:
  Adagrad(const ad::ParameterSet& params, double lr, double initial_accumulator);
  void step(ad::ParameterSet& params);

 private:
  double lr_;
  std::vector<Matrix> accum_;
};

class Adam {
 public:
  Adam(const ad::ParameterSet& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ad::ParameterSet& params);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace polyparse
