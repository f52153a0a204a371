#include "polysed/rmsprop.hpp"

#include <cmath>

namespace polysed {

RmsPropState RmsPropState::for_params(const NetworkParams& params, double eta, double rho, double epsilon) {
  return {params.zeros_like(), eta, rho, epsilon};
}

void rmsprop_update(NetworkParams& params, const NetworkParams& grads, RmsPropState& state) {
  auto weights = params.tensors();
  const auto g = grads.tensors();
  auto r = state.mean_square.tensors();
  if (weights.size() != g.size() || weights.size() != r.size()) {
    throw InvalidInput("rmsprop: gradient layout does not match the network");
  }
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g[k].size() != weights[k].size() || r[k].size() != weights[k].size()) {
      throw InvalidInput("rmsprop: tensor shape mismatch");
    }
    for (double v : g[k]) {
      if (!std::isfinite(v)) throw DivergenceError("non-finite gradient entry; update aborted");
    }
  }
  for (std::size_t k = 0; k < g.size(); ++k) {
    for (std::size_t j = 0; j < g[k].size(); ++j) {
      const double gj = g[k][j];
      r[k][j] = state.rho * r[k][j] + (1.0 - state.rho) * gj * gj;
      weights[k][j] -= state.eta * gj / std::sqrt(r[k][j] + state.epsilon);
    }
  }
}

}  // namespace polysed
