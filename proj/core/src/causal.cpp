#include "tost/causal.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "attn_common.hpp"
#include "tost/error.hpp"

namespace tost {

namespace {

void validate_causal_inputs(const Matrix& z, const ProjectionBank& bank,
                            const CausalParams& params) {
  detail::validate_attention_inputs(z, bank, params.base);
  if (params.bias) {
    if (params.bias->rows() != z.cols() || params.bias->cols() != bank.bases.size())
      throw DimensionError("bias must be " + std::to_string(z.cols()) + "x" +
                           std::to_string(bank.bases.size()));
    if (!all_finite(*params.bias)) throw ValidationError("bias has non-finite entries");
  }
}

detail::AttnParams<double> make_causal_params(std::size_t d, std::size_t n,
                                              const ProjectionBank& bank,
                                              const TssaParams& base) {
  if (bank.bases.empty()) throw DimensionError("projection bank is empty");
  detail::AttnParams<double> a;
  a.d = d;
  a.n = n;
  a.heads = bank.bases.size();
  a.p = bank.bases[0].cols();
  a.tau = base.tau;
  a.eta = base.eta;
  a.alpha = base.f.alpha;
  a.normalize = base.normalize_membership;
  a.norm_eps = base.norm_eps;
  a.w = base.w ? base.w->data() : nullptr;
  return a;
}

}  // namespace

Membership causal_membership(const Matrix& z, const ProjectionBank& bank,
                             const CausalParams& params) {
  validate_causal_inputs(z, bank, params);
  const auto a = make_causal_params(z.rows(), z.cols(), bank, params.base);
  const std::vector<const double*> ptrs = detail::bank_ptrs(bank);
  Membership pi{Matrix(a.n, a.heads)};
  Matrix unused(a.d, a.n);
  detail::causal_forward(a, z.data(), ptrs.data(),
                         params.bias ? params.bias->data() : nullptr, unused.data(),
                         pi.pi.data());
  return pi;
}

Matrix causal_tssa_attention(const Matrix& z, const ProjectionBank& bank,
                             const CausalParams& params) {
  validate_causal_inputs(z, bank, params);
  const auto a = make_causal_params(z.rows(), z.cols(), bank, params.base);
  const std::vector<const double*> ptrs = detail::bank_ptrs(bank);
  Matrix out(a.d, a.n);
  detail::causal_forward(a, z.data(), ptrs.data(),
                         params.bias ? params.bias->data() : nullptr, out.data());
  return out;
}

Matrix causal_token_update(const Matrix& z, const ProjectionBank& bank,
                           const CausalParams& params) {
  Matrix out = causal_tssa_attention(z, bank, params);
  out += z;
  return out;
}

CausalStream::CausalStream(ProjectionBank bank, CausalParams params)
    : bank_(std::move(bank)),
      params_(std::move(params)),
      ptrs_(detail::bank_ptrs(bank_)),
      impl_(make_causal_params(bank_.feature_dim(), 0, bank_, params_.base),
            ptrs_.data()),
      last_pi_(bank_.heads(), 0.0) {
  detail::validate_bank_params(bank_.feature_dim(), bank_, params_.base);
  if (params_.bias && params_.bias->cols() != bank_.heads())
    throw DimensionError("bias column count must equal head count");
}

std::vector<double> CausalStream::push(const std::vector<double>& z_col) {
  if (z_col.size() != bank_.feature_dim())
    throw DimensionError("pushed column has " + std::to_string(z_col.size()) +
                         " entries, expected " + std::to_string(bank_.feature_dim()));
  for (double v : z_col)
    if (!std::isfinite(v)) throw ValidationError("pushed column has non-finite entries");
  const double* bias_row = nullptr;
  if (params_.bias) {
    if (impl_.pos >= params_.bias->rows())
      throw DimensionError("stream advanced past the bias row count");
    bias_row = params_.bias->row(impl_.pos);
  }
  std::vector<double> out(bank_.feature_dim());
  impl_.push(z_col.data(), bias_row, out.data(), last_pi_.data());
  return out;
}

}  // namespace tost
