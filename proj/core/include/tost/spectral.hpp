#pragma once

#include <cmath>

namespace tost {

// Concave spectral function f(x) = log(1 + alpha x) and its derivative,
// applied to eigenvalues or second moments of token covariances. alpha plays
// the role of the rate-distortion coefficient.
struct SpectralFn {
  double alpha = 1.0;

  double eval(double x) const { return std::log1p(alpha * x); }
  double grad(double x) const { return alpha / (1.0 + alpha * x); }
};

}  // namespace tost
