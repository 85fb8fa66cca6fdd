#include "tost/coding_rate.hpp"

#include <cmath>
#include <string>

#include "tost/error.hpp"
#include "tost/linalg.hpp"

namespace tost {

namespace {

constexpr double kEmptyGroup = 1e-12;

void require_tokens(const Matrix& z) {
  if (z.rows() == 0 || z.cols() == 0)
    throw DimensionError("token matrix must be nonempty");
  if (!all_finite(z)) throw ValidationError("token matrix has non-finite entries");
}

void require_membership(const Membership& pi, std::size_t n) {
  if (pi.pi.rows() != n)
    throw DimensionError("membership rows " + std::to_string(pi.pi.rows()) +
                         " do not match token count " + std::to_string(n));
  if (pi.pi.cols() == 0) throw DimensionError("membership needs >= 1 group");
  for (std::size_t j = 0; j < pi.pi.rows(); ++j) {
    double sum = 0.0;
    for (std::size_t k = 0; k < pi.pi.cols(); ++k) {
      double v = pi.pi(j, k);
      if (!std::isfinite(v) || v < 0.0)
        throw ValidationError("membership entry (" + std::to_string(j) + "," +
                              std::to_string(k) + ") invalid");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-8)
      throw ValidationError("membership row " + std::to_string(j) +
                            " sums to " + std::to_string(sum));
  }
}

void require_bank(const ProjectionBank& bank, std::size_t d, std::size_t k) {
  if (bank.bases.empty()) throw DimensionError("projection bank is empty");
  if (bank.bases.size() != k)
    throw DimensionError("bank has " + std::to_string(bank.bases.size()) +
                         " heads, membership has " + std::to_string(k));
  const std::size_t p = bank.bases[0].cols();
  for (const Matrix& u : bank.bases) {
    if (u.rows() != d || u.cols() != p)
      throw DimensionError("bank bases disagree in shape or do not match d = " +
                           std::to_string(d));
    if (u.cols() > u.rows()) throw DimensionError("bank head_dim exceeds feature_dim");
  }
}

// Eigenvalues of Z Diag(w) Z^T via whichever Gram matrix is smaller; the
// nonzero spectra agree and f(0) = 0 makes padding harmless.
std::vector<double> weighted_covariance_eigs(const Matrix& z,
                                             const std::vector<double>& w) {
  const std::size_t d = z.rows();
  const std::size_t n = z.cols();
  Matrix zw = z;
  for (std::size_t j = 0; j < n; ++j) {
    const double s = std::sqrt(w[j]);
    for (std::size_t i = 0; i < d; ++i) zw(i, j) *= s;
  }
  Matrix gram = d <= n ? multiply_a_bt(zw, zw) : multiply_at_b(zw, zw);
  return sym_eig(gram).eigenvalues;
}

}  // namespace

Membership uniform_membership(std::size_t n, std::size_t k) {
  if (n == 0 || k == 0) throw DimensionError("uniform_membership: n, k must be >= 1");
  Membership m{Matrix(n, k)};
  m.pi.fill(1.0 / static_cast<double>(k));
  return m;
}

Membership hard_membership(const std::vector<std::size_t>& labels, std::size_t k) {
  if (labels.empty() || k == 0) throw DimensionError("hard_membership: empty input");
  Membership m{Matrix(labels.size(), k)};
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] >= k)
      throw ValidationError("hard_membership: label " + std::to_string(labels[j]) +
                            " out of range");
    m.pi(j, labels[j]) = 1.0;
  }
  return m;
}

double expansion_rate(const Matrix& z, double alpha) {
  require_tokens(z);
  if (alpha <= 0.0) throw ValidationError("expansion_rate: alpha must be positive");
  const double n = static_cast<double>(z.cols());
  std::vector<double> w(z.cols(), 1.0);
  double rate = 0.0;
  for (double lam : weighted_covariance_eigs(z, w))
    rate += std::log1p(alpha * lam / n);
  return 0.5 * rate;
}

double compression_rate(const Matrix& z, const Membership& pi, double alpha) {
  if (alpha <= 0.0) throw ValidationError("compression_rate: alpha must be positive");
  return general_compression(z, pi, SpectralFn{alpha});
}

double general_compression(const Matrix& z, const Membership& pi, const SpectralFn& f) {
  require_tokens(z);
  require_membership(pi, z.cols());
  const double n = static_cast<double>(z.cols());
  double rate = 0.0;
  std::vector<double> w(z.cols());
  for (std::size_t k = 0; k < pi.groups(); ++k) {
    double nk = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      w[j] = pi.pi(j, k);
      nk += w[j];
    }
    if (nk < kEmptyGroup) continue;
    double group = 0.0;
    for (double lam : weighted_covariance_eigs(z, w)) group += f.eval(lam / nk);
    rate += 0.5 * (nk / n) * group;
  }
  return rate;
}

double variational_compression(const Matrix& z, const Membership& pi,
                               const ProjectionBank& bank, const SpectralFn& f) {
  require_tokens(z);
  require_membership(pi, z.cols());
  require_bank(bank, z.rows(), pi.groups());
  const double n = static_cast<double>(z.cols());
  const std::size_t p = bank.head_dim();
  double rate = 0.0;
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    double nk = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) nk += pi.pi(j, k);
    if (nk < kEmptyGroup) continue;
    Matrix proj = multiply_at_b(bank.bases[k], z);
    double group = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      double diag = 0.0;
      for (std::size_t j = 0; j < z.cols(); ++j)
        diag += proj(i, j) * proj(i, j) * pi.pi(j, k);
      group += f.eval(diag / nk);
    }
    rate += 0.5 * (nk / n) * group;
  }
  return rate;
}

ProjectionBank oracle_bases(const Matrix& z, const Membership& pi, std::size_t p) {
  require_tokens(z);
  require_membership(pi, z.cols());
  const std::size_t d = z.rows();
  if (p == 0 || p > d)
    throw DimensionError("oracle_bases: p must be in [1, d]");
  ProjectionBank bank;
  bank.bases.reserve(pi.groups());
  Matrix zw(d, z.cols());
  for (std::size_t k = 0; k < pi.groups(); ++k) {
    for (std::size_t j = 0; j < z.cols(); ++j) {
      const double s = std::sqrt(pi.pi(j, k));
      for (std::size_t i = 0; i < d; ++i) zw(i, j) = z(i, j) * s;
    }
    EigenDecomposition eig = sym_eig(multiply_a_bt(zw, zw));
    Matrix u(d, p);
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t i = 0; i < d; ++i) u(i, j) = eig.eigenvectors(i, j);
    bank.bases.push_back(std::move(u));
  }
  return bank;
}

double variational_bound_gap(const Matrix& z, const Membership& pi,
                             const ProjectionBank& bank, const SpectralFn& f) {
  require_tokens(z);
  require_membership(pi, z.cols());
  require_bank(bank, z.rows(), pi.groups());
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    const Matrix& u = bank.bases[k];
    Matrix gram = multiply_at_b(u, u);
    bool orthonormal = true;
    for (std::size_t i = 0; i < gram.rows() && orthonormal; ++i)
      for (std::size_t j = 0; j < gram.cols(); ++j) {
        const double target = i == j ? 1.0 : 0.0;
        if (std::fabs(gram(i, j) - target) > 1e-8) {
          orthonormal = false;
          break;
        }
      }
    if (!orthonormal) continue;  // the bound hypothesis needs orthonormal bases

    std::vector<double> w(z.cols());
    for (std::size_t j = 0; j < z.cols(); ++j) w[j] = pi.pi(j, k);
    Matrix zw = z;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      const double s = std::sqrt(w[j]);
      for (std::size_t i = 0; i < z.rows(); ++i) zw(i, j) *= s;
    }
    Matrix cov = multiply_a_bt(zw, zw);
    Matrix residual = cov - multiply(u, multiply_at_b(u, cov));
    if (max_abs(residual) > 1e-8)
      throw PreconditionError("variational_bound_gap: group " + std::to_string(k) +
                              " covariance leaves the bank's column span (residual " +
                              std::to_string(max_abs(residual)) + ")");
  }
  return variational_compression(z, pi, bank, f) - general_compression(z, pi, f);
}

Matrix grad_variational(const Matrix& z, const Membership& pi,
                        const ProjectionBank& bank, const SpectralFn& f) {
  require_tokens(z);
  require_membership(pi, z.cols());
  require_bank(bank, z.rows(), pi.groups());
  const std::size_t n = z.cols();
  const std::size_t p = bank.head_dim();
  Matrix out(z.rows(), n);
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    double nk = 0.0;
    for (std::size_t j = 0; j < n; ++j) nk += pi.pi(j, k);
    if (nk < kEmptyGroup) continue;
    Matrix proj = multiply_at_b(bank.bases[k], z);
    std::vector<double> gate(p);
    for (std::size_t i = 0; i < p; ++i) {
      double moment = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        moment += proj(i, j) * proj(i, j) * pi.pi(j, k);
      gate[i] = f.grad(moment / nk);
    }
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < n; ++j)
        proj(i, j) *= gate[i] * pi.pi(j, k);
    Matrix contrib = multiply(bank.bases[k], proj);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < n; ++j) out(i, j) += scale * contrib(i, j);
  }
  return out;
}

}  // namespace tost
