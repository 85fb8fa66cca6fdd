#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "tost/coding_rate.hpp"
#include "tost/matrix.hpp"
#include "tost/spectral.hpp"

namespace tost {

struct TssaParams {
  double tau = 1.0;  // step size of the update the attention output realizes
  double eta = 1.0;  // membership temperature
  SpectralFn f{1.0};
  bool normalize_membership = true;
  double norm_eps = 1e-12;
  // Optional d x (p*K) output matrix. When present it replaces the stacked
  // bank left factor and the tau/n scaling is dropped.
  std::optional<Matrix> w;

  // Conventional defaults: alpha = d / epsilon^2, tau = eta = 1.
  static TssaParams for_dim(std::size_t d, double epsilon = 1.0);
};

// Gate vector grad-f of the per-direction second moments of projected tokens:
// entry i is f.grad((U^T Z)_i^{.2} pi / <pi, 1>). Works on p x n projections
// only; nothing quadratic in n or d is formed.
std::vector<double> diag_gate(const Matrix& z, const std::vector<double>& pi,
                              const Matrix& u, const SpectralFn& f);

// Row j = softmax over heads of the squared projected norm of token j scaled
// by 1/(2 eta). With normalize_membership, projections are first rescaled per
// direction by reciprocal row norms of U_k^T Z.
Membership estimate_membership(const Matrix& z, const ProjectionBank& bank,
                               const TssaParams& params);

// -(tau/n) sum_k U_k Diag(gate_k) U_k^T Z Diag(pi_k) with pi estimated
// internally; the W form applies -W to the stacked gated projections instead.
Matrix tssa_attention(const Matrix& z, const ProjectionBank& bank,
                      const TssaParams& params);

// Residual step Z + tssa_attention(Z).
Matrix token_update(const Matrix& z, const ProjectionBank& bank,
                    const TssaParams& params);

}  // namespace tost
