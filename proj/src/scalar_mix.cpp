#include "polyparse/scalar_mix.hpp"

#include "polyparse/error.hpp"

namespace polyparse {

Vector ScalarMix::weights() const {
  if (raw.size() != 3) throw PreconditionError("scalar mix needs 3 raw weights");
  const Vector e = (raw.array() - raw.maxCoeff()).exp();
  return e / e.sum();
}

Vector ScalarMix::apply(const LayeredEmbedding& e) const {
  const auto d = e.layers[0].size();
  for (int j = 1; j < 3; ++j)
    if (e.layers[j].size() != d) throw PreconditionError("scalar mix: layer dimensions differ");
  const Vector w = weights();
  return gamma * (w(0) * e.layers[0] + w(1) * e.layers[1] + w(2) * e.layers[2]);
}

ad::Var scalar_mix(ad::Var raw, ad::Var gamma, const std::array<ad::Var, 3>& layers) {
  for (int j = 1; j < 3; ++j)
    if (layers[j].rows() != layers[0].rows() || layers[j].cols() != layers[0].cols())
      throw PreconditionError("scalar mix: layer dimensions differ");
  ad::Var lambda = ad::softmax(raw);
  ad::Var out = ad::scale_by(layers[0], ad::pick(lambda, {{0, 0}}));
  for (int j = 1; j < 3; ++j) out = ad::add(out, ad::scale_by(layers[j], ad::pick(lambda, {{j, 0}})));
  return ad::scale_by(out, gamma);
}

}  // namespace polyparse
