#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "tost/detail/kernels.hpp"
#include "tost/matrix.hpp"
#include "tost/tssa.hpp"

namespace tost {

struct CausalParams {
  TssaParams base;
  // Optional n x K pre-softmax additive bias on the membership logits.
  std::optional<Matrix> bias;
};

// Row j depends on tokens 1..j only: the logit uses the token's projections
// rescaled by reciprocal row norms of the prefix (when normalization is on)
// plus the bias row. One pass, running sums of squares.
Membership causal_membership(const Matrix& z, const ProjectionBank& bank,
                             const CausalParams& params);

// Column j = -(tau/j) sum_k pi_jk U_k Diag(gate over the prefix moments) U_k^T z_j.
// Prefix moments are carried as running sums: O(K p) state, no per-position
// recomputation. The W form mirrors tssa_attention (no tau/j factor).
Matrix causal_tssa_attention(const Matrix& z, const ProjectionBank& bank,
                             const CausalParams& params);

// Residual step Z + causal_tssa_attention(Z).
Matrix causal_token_update(const Matrix& z, const ProjectionBank& bank,
                           const CausalParams& params);

// Incremental interface: feed tokens one at a time and receive output columns.
// The batch functions above push columns through this same recurrence, so
// streaming and batch results are bitwise identical.
class CausalStream {
 public:
  CausalStream(ProjectionBank bank, CausalParams params);
  // Internal state points into the owned bank; moving would dangle it.
  CausalStream(const CausalStream&) = delete;
  CausalStream& operator=(const CausalStream&) = delete;

  // Appends token `position() + 1` and returns its attention output column.
  // When params.bias is present its row for this position is applied; pushing
  // past the bias row count is an error.
  std::vector<double> push(const std::vector<double>& z_col);

  // Membership row of the most recently pushed token.
  const std::vector<double>& last_membership() const { return last_pi_; }

  std::size_t position() const { return impl_.pos; }
  std::size_t feature_dim() const { return bank_.feature_dim(); }

 private:
  ProjectionBank bank_;
  CausalParams params_;
  std::vector<const double*> ptrs_;
  detail::CausalStream<double> impl_;
  std::vector<double> last_pi_;
};

}  // namespace tost
