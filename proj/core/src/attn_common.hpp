#pragma once

// Shared validation and kernel-parameter plumbing for the attention entry
// points. Internal to the library.

#include <string>
#include <vector>

#include "tost/coding_rate.hpp"
#include "tost/detail/kernels.hpp"
#include "tost/error.hpp"
#include "tost/matrix.hpp"
#include "tost/tssa.hpp"

namespace tost::detail {

inline void validate_bank_params(std::size_t d, const ProjectionBank& bank,
                                 const TssaParams& params) {
  if (bank.bases.empty()) throw DimensionError("projection bank is empty");
  const std::size_t p = bank.bases[0].cols();
  for (const Matrix& u : bank.bases) {
    if (u.rows() != d || u.cols() != p)
      throw DimensionError("bank bases must all be " + std::to_string(d) + "x" +
                           std::to_string(p));
    if (u.cols() > u.rows())
      throw DimensionError("bank head_dim exceeds feature_dim");
  }
  if (params.tau <= 0.0 || params.eta <= 0.0 || params.f.alpha <= 0.0)
    throw ValidationError("tau, eta and alpha must be positive");
  if (params.norm_eps <= 0.0) throw ValidationError("norm_eps must be positive");
  if (params.w) {
    if (params.w->rows() != d || params.w->cols() != p * bank.bases.size())
      throw DimensionError("W must be " + std::to_string(d) + "x" +
                           std::to_string(p * bank.bases.size()));
    if (!all_finite(*params.w)) throw ValidationError("W has non-finite entries");
  }
}

inline void validate_attention_inputs(const Matrix& z, const ProjectionBank& bank,
                                      const TssaParams& params) {
  if (z.rows() == 0 || z.cols() == 0)
    throw DimensionError("token matrix must be nonempty");
  if (!all_finite(z)) throw ValidationError("token matrix has non-finite entries");
  validate_bank_params(z.rows(), bank, params);
}

inline AttnParams<double> make_attn_params(const Matrix& z, const ProjectionBank& bank,
                                           const TssaParams& params) {
  AttnParams<double> a;
  a.d = z.rows();
  a.n = z.cols();
  a.heads = bank.bases.size();
  a.p = bank.bases[0].cols();
  a.tau = params.tau;
  a.eta = params.eta;
  a.alpha = params.f.alpha;
  a.normalize = params.normalize_membership;
  a.norm_eps = params.norm_eps;
  a.w = params.w ? params.w->data() : nullptr;
  return a;
}

inline std::vector<const double*> bank_ptrs(const ProjectionBank& bank) {
  std::vector<const double*> ptrs;
  ptrs.reserve(bank.bases.size());
  for (const Matrix& u : bank.bases) ptrs.push_back(u.data());
  return ptrs;
}

}  // namespace tost::detail
