#pragma once

#include <array>

#include "polyparse/autodiff.hpp"
#include "polyparse/bilm.hpp"

namespace polyparse {

// gamma * sum_j softmax(raw)_j * h_j over the three LM layers.
struct ScalarMix {
  Vector raw = Vector::Zero(3);
  double gamma = 1.0;

  Vector weights() const;
  Vector apply(const LayeredEmbedding& e) const;
};

// Tape version; `layers` may hold one column per token.
ad::Var scalar_mix(ad::Var raw, ad::Var gamma, const std::array<ad::Var, 3>& layers);

}  // namespace polyparse
