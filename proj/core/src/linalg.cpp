#include "tost/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tost/error.hpp"

namespace tost {

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) s += a(i, j) * a(i, j);
  return std::sqrt(2.0 * s);
}

}  // namespace

EigenDecomposition sym_eig(const Matrix& m) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw DimensionError("sym_eig: input must be square and nonempty, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (!all_finite(m)) throw ValidationError("sym_eig: non-finite entries");
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::fabs(m(i, j) - m(j, i)) > 1e-10)
        throw DimensionError("sym_eig: input asymmetric at (" + std::to_string(i) +
                             "," + std::to_string(j) + ")");

  Matrix a = m;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double avg = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = a(j, i) = avg;
    }
  Matrix v = Matrix::identity(n);

  // Absolute threshold scaled by the input's magnitude so convergence does
  // not depend on the caller's units.
  const double thr = 1e-12 * std::max(1.0, frobenius(a));
  bool converged = false;
  for (int sweep = 0; sweep < 100; ++sweep) {
    if (off_diagonal_norm(a) <= thr) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = 1.0 / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = a(p, i) = c * aip - s * aiq;
          a(i, q) = a(q, i) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  if (!converged && off_diagonal_norm(a) > thr)
    throw NumericalError("sym_eig: Jacobi failed to converge in 100 sweeps");

  std::vector<double> lam(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = a(i, i);
    if (x < 0.0 && x >= -1e-12) x = 0.0;
    lam[i] = x;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return lam[x] > lam[y]; });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = lam[order[j]];
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = v(i, order[j]);
  }
  return out;
}

Matrix random_orthonormal(std::size_t d, std::size_t p, Rng& rng) {
  if (d == 0 || p == 0)
    throw DimensionError("random_orthonormal: dimensions must be >= 1");
  if (p > d)
    throw DimensionError("random_orthonormal: p = " + std::to_string(p) +
                         " exceeds d = " + std::to_string(d));
  Matrix u(d, p);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < p; ++j) u(i, j) = rng.normal();

  for (std::size_t j = 0; j < p; ++j) {
    for (int attempt = 0;; ++attempt) {
      // Modified Gram-Schmidt, two passes for orthogonality at working precision.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < j; ++i) {
          double dot = 0.0;
          for (std::size_t r = 0; r < d; ++r) dot += u(r, i) * u(r, j);
          for (std::size_t r = 0; r < d; ++r) u(r, j) -= dot * u(r, i);
        }
      }
      double norm = 0.0;
      for (std::size_t r = 0; r < d; ++r) norm += u(r, j) * u(r, j);
      norm = std::sqrt(norm);
      if (norm > 1e-8) {
        for (std::size_t r = 0; r < d; ++r) u(r, j) /= norm;
        break;
      }
      if (attempt >= 100)
        throw NumericalError("random_orthonormal: degenerate column persisted");
      for (std::size_t r = 0; r < d; ++r) u(r, j) = rng.normal();
    }
  }
  return u;
}

Matrix random_orthonormal(std::size_t d, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  return random_orthonormal(d, p, rng);
}

std::vector<double> softmax(const std::vector<double>& v) {
  if (v.empty()) throw DimensionError("softmax: empty input");
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

}  // namespace tost
