#include "tost/tssa.hpp"

#include <cmath>
#include <string>

#include "attn_common.hpp"
#include "tost/error.hpp"

namespace tost {

TssaParams TssaParams::for_dim(std::size_t d, double epsilon) {
  if (d == 0) throw DimensionError("for_dim: d must be >= 1");
  if (epsilon <= 0.0) throw ValidationError("for_dim: epsilon must be positive");
  TssaParams p;
  p.f.alpha = static_cast<double>(d) / (epsilon * epsilon);
  return p;
}

std::vector<double> diag_gate(const Matrix& z, const std::vector<double>& pi,
                              const Matrix& u, const SpectralFn& f) {
  if (z.rows() == 0 || z.cols() == 0)
    throw DimensionError("diag_gate: token matrix must be nonempty");
  if (pi.size() != z.cols())
    throw DimensionError("diag_gate: weight vector length " + std::to_string(pi.size()) +
                         " does not match token count " + std::to_string(z.cols()));
  if (u.rows() != z.rows() || u.cols() == 0 || u.cols() > u.rows())
    throw DimensionError("diag_gate: basis shape incompatible with tokens");
  double mass = 0.0;
  for (double w : pi) {
    if (!std::isfinite(w) || w < 0.0)
      throw ValidationError("diag_gate: weights must be finite and non-negative");
    mass += w;
  }
  if (mass < 1e-12)
    throw DegenerateGroupError("diag_gate: weight vector has (near-)zero total mass");

  const std::size_t p = u.cols();
  Matrix proj = multiply_at_b(u, z);
  std::vector<double> gate(p);
  for (std::size_t i = 0; i < p; ++i) {
    double moment = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j)
      moment += proj(i, j) * proj(i, j) * pi[j];
    gate[i] = f.grad(moment / mass);
  }
  return gate;
}

Membership estimate_membership(const Matrix& z, const ProjectionBank& bank,
                               const TssaParams& params) {
  detail::validate_attention_inputs(z, bank, params);
  const detail::AttnParams<double> a = detail::make_attn_params(z, bank, params);
  const std::vector<const double*> ptrs = detail::bank_ptrs(bank);
  Membership pi{Matrix(a.n, a.heads)};
  detail::tssa_membership(a, z.data(), ptrs.data(), pi.pi.data());
  return pi;
}

Matrix tssa_attention(const Matrix& z, const ProjectionBank& bank,
                      const TssaParams& params) {
  detail::validate_attention_inputs(z, bank, params);
  const detail::AttnParams<double> a = detail::make_attn_params(z, bank, params);
  const std::vector<const double*> ptrs = detail::bank_ptrs(bank);
  Matrix out(a.d, a.n);
  detail::tssa_forward(a, z.data(), ptrs.data(), out.data());
  return out;
}

Matrix token_update(const Matrix& z, const ProjectionBank& bank,
                    const TssaParams& params) {
  Matrix out = tssa_attention(z, bank, params);
  out += z;
  return out;
}

}  // namespace tost
