#pragma once

#include <cstddef>
#include <vector>

#include "tost/matrix.hpp"
#include "tost/spectral.hpp"

namespace tost {

// Soft assignment of n tokens to K groups; rows sum to 1.
struct Membership {
  Matrix pi;  // n x K

  std::size_t tokens() const { return pi.rows(); }
  std::size_t groups() const { return pi.cols(); }
};

Membership uniform_membership(std::size_t n, std::size_t k);
Membership hard_membership(const std::vector<std::size_t>& labels, std::size_t k);

// K projection bases, each d x p.
struct ProjectionBank {
  std::vector<Matrix> bases;

  std::size_t heads() const { return bases.size(); }
  std::size_t feature_dim() const { return bases.empty() ? 0 : bases[0].rows(); }
  std::size_t head_dim() const { return bases.empty() ? 0 : bases[0].cols(); }
};

// 1/2 sum_i log(1 + alpha lambda_i(Z Z^T / n)); the rate of the whole token set.
double expansion_rate(const Matrix& z, double alpha);

// Group-weighted sum of per-group rates at the log(1 + alpha x) spectral fn.
double compression_rate(const Matrix& z, const Membership& pi, double alpha);

// Same weighting with an arbitrary concave spectral fn applied to eigenvalues.
double general_compression(const Matrix& z, const Membership& pi, const SpectralFn& f);

// Upper bound replacing eigenvalues with diagonal entries of the projected
// covariance; the diagonal is accumulated from squared projections of tokens,
// no d x d intermediate is formed.
double variational_compression(const Matrix& z, const Membership& pi,
                               const ProjectionBank& bank, const SpectralFn& f);

// Top-p eigenvector bank of each group covariance; makes the bound tight.
ProjectionBank oracle_bases(const Matrix& z, const Membership& pi, std::size_t p);

// variational_compression minus general_compression. For orthonormal banks the
// group covariance must lie in the bank's column span (checked, precondition
// error otherwise); the returned gap is then >= 0 up to roundoff.
double variational_bound_gap(const Matrix& z, const Membership& pi,
                             const ProjectionBank& bank, const SpectralFn& f);

// d x n gradient of variational_compression in Z, with pi held constant.
Matrix grad_variational(const Matrix& z, const Membership& pi,
                        const ProjectionBank& bank, const SpectralFn& f);

}  // namespace tost
