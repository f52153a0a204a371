#pragma once

#include "polysed/network.hpp"

namespace polysed {

/// Running mean of squared gradients, one accumulator per parameter.
struct RmsPropState {
  NetworkParams mean_square;
  double eta = 0.005;
  double rho = 0.9;
  double epsilon = 1e-8;

  static RmsPropState for_params(const NetworkParams& params, double eta = 0.005, double rho = 0.9,
                                 double epsilon = 1e-8);
};

/// r <- rho * r + (1 - rho) * g^2;  w <- w - eta * g / sqrt(r + epsilon).
/// Throws DivergenceError, leaving params and state untouched, when any
/// gradient entry is not finite.
void rmsprop_update(NetworkParams& params, const NetworkParams& grads, RmsPropState& state);

}  // namespace polysed
