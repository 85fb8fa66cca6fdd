#include <doctest.h>

#include <cmath>
#include <vector>

#include "tost/coding_rate.hpp"
#include "tost/error.hpp"
#include "tost/linalg.hpp"
#include "tost/matrix.hpp"
#include "tost/rng.hpp"

using namespace tost;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

Membership soft_membership(std::size_t n, std::size_t k, Rng& rng) {
  Membership pi;
  pi.pi = Matrix(n, k);
  std::vector<double> logits(k);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < k; ++c) logits[c] = rng.normal();
    const std::vector<double> row = softmax(logits);
    for (std::size_t c = 0; c < k; ++c) pi.pi(j, c) = row[c];
  }
  return pi;
}

// 2 x 2 token matrix realizing a prescribed second-moment matrix Z Z^T / 2
Matrix tokens_with_moment(const Matrix& m) {
  const EigenDecomposition e = sym_eig(m);
  Matrix z = e.eigenvectors;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) z(i, j) *= std::sqrt(2.0 * e.eigenvalues[j]);
  return z;
}

ProjectionBank bank_of(std::initializer_list<Matrix> mats) {
  ProjectionBank bank;
  for (const Matrix& m : mats) bank.bases.push_back(m);
  return bank;
}

}  // namespace

TEST_CASE("expansion_rate closed forms") {
  CHECK(expansion_rate(Matrix(3, 5), 1.0) == 0.0);

  CHECK(expansion_rate(Matrix::identity(2), 1.0) ==
        doctest::Approx(std::log(1.5)).epsilon(1e-12));

  Rng rng(3);
  const Matrix z = gaussian(4, 7, rng);
  Matrix z2 = z;
  z2 *= 2.0;
  CHECK(expansion_rate(z2, 1.0) > expansion_rate(z, 1.0));
  CHECK(expansion_rate(z, 1.0) >= 0.0);

  Matrix bad(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(expansion_rate(bad, 1.0), ValidationError);
}

TEST_CASE("compression_rate closed forms and K=1 collapse") {
  CHECK(compression_rate(Matrix(2, 4), uniform_membership(4, 2), 1.0) == 0.0);

  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix z = gaussian(3, 6, rng);
    const double lhs = compression_rate(z, uniform_membership(6, 1), 1.0);
    CHECK(std::abs(lhs - expansion_rate(z, 1.0)) <= 1e-10);
  }

  // identity tokens, hard split: each group holds one unit direction
  const double r = compression_rate(Matrix::identity(2), hard_membership({0, 1}, 2), 1.0);
  CHECK(r == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("compression_rate rejects malformed memberships") {
  const Matrix z = Matrix::identity(2);
  Membership bad;
  bad.pi = Matrix(2, 2);
  bad.pi(0, 0) = 0.7;  // row sums 0.7 and 0
  CHECK_THROWS_AS(compression_rate(z, bad, 1.0), ValidationError);

  bad.pi(0, 0) = 1.5;
  bad.pi(0, 1) = -0.5;
  bad.pi(1, 0) = 1.0;
  CHECK_THROWS_AS(compression_rate(z, bad, 1.0), ValidationError);
}

TEST_CASE("general_compression matches the log form and hand spectrum") {
  Rng rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix z = gaussian(4, 9, rng);
    const Membership pi = soft_membership(9, 3, rng);
    const double a = general_compression(z, pi, SpectralFn{1.7});
    const double b = compression_rate(z, pi, 1.7);
    CHECK(std::abs(a - b) <= 1e-8);
  }

  CHECK(general_compression(Matrix(3, 4), uniform_membership(4, 2), SpectralFn{1.0}) ==
        0.0);

  // Z Z^T / n = [[2,1],[1,2]] has eigenvalues (3,1)
  Matrix m(2, 2);
  m(0, 0) = 2; m(0, 1) = 1; m(1, 0) = 1; m(1, 1) = 2;
  const Matrix z = tokens_with_moment(m);
  const double r = general_compression(z, uniform_membership(2, 1), SpectralFn{1.0});
  CHECK(r == doctest::Approx(0.5 * std::log(8.0)).epsilon(1e-10));
}

TEST_CASE("variational_compression at a hand-rotated basis") {
  CHECK(variational_compression(Matrix(2, 2), uniform_membership(2, 1),
                                bank_of({Matrix::identity(2)}), SpectralFn{1.0}) ==
        0.0);

  // Z Z^T / n = diag(3, 0); a 45-degree basis sees diagonal (1.5, 1.5)
  Matrix m(2, 2);
  m(0, 0) = 3.0;
  const Matrix z = tokens_with_moment(m);
  const double s = std::sqrt(0.5);
  Matrix rot(2, 2);
  rot(0, 0) = s; rot(0, 1) = -s;
  rot(1, 0) = s; rot(1, 1) = s;

  const double vr = variational_compression(z, uniform_membership(2, 1),
                                            bank_of({rot}), SpectralFn{1.0});
  CHECK(vr == doctest::Approx(std::log(2.5)).epsilon(1e-12));

  const double gr = general_compression(z, uniform_membership(2, 1), SpectralFn{1.0});
  CHECK(gr == doctest::Approx(0.5 * std::log(4.0)).epsilon(1e-12));
  CHECK(vr >= gr);

  const double gap = variational_bound_gap(z, uniform_membership(2, 1),
                                           bank_of({rot}), SpectralFn{1.0});
  CHECK(gap == doctest::Approx(std::log(1.25)).epsilon(1e-10));
}

TEST_CASE("oracle bases are tight and span hard groups") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 2 + rng.next_u64() % 6;
    const std::size_t n = 2 + rng.next_u64() % 10;
    const std::size_t k = 1 + rng.next_u64() % 3;
    const Matrix z = gaussian(d, n, rng);
    const Membership pi = soft_membership(n, k, rng);
    const SpectralFn f{static_cast<double>(d)};

    const ProjectionBank oracle = oracle_bases(z, pi, d);
    CHECK(std::abs(variational_compression(z, pi, oracle, f) -
                   general_compression(z, pi, f)) <= 1e-8);
    for (const Matrix& u : oracle.bases)
      CHECK(max_abs_diff(multiply_at_b(u, u), Matrix::identity(d)) <= 1e-8);
  }

  // orthogonal columns under a hard split: each basis spans its own column
  Matrix z(3, 2);
  z(0, 0) = 2.0;
  z(1, 1) = -1.0;
  const ProjectionBank spans = oracle_bases(z, hard_membership({0, 1}, 2), 1);
  CHECK(std::abs(spans.bases[0](0, 0)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(spans.bases[1](1, 0)) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("bound gap sign over random instances") {
  Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 2 + rng.next_u64() % 11;
    const std::size_t n = 1 + rng.next_u64() % 20;
    const std::size_t k = 1 + rng.next_u64() % 4;
    const Matrix z = gaussian(d, n, rng);
    const Membership pi = soft_membership(n, k, rng);
    const SpectralFn f{static_cast<double>(d)};

    ProjectionBank bank;
    for (std::size_t c = 0; c < k; ++c)
      bank.bases.push_back(random_orthonormal(d, d, rng));
    CHECK(variational_bound_gap(z, pi, bank, f) >= -1e-8);

    CHECK(std::abs(variational_bound_gap(z, pi, oracle_bases(z, pi, d), f)) <= 1e-8);
  }
}

TEST_CASE("bound gap enforces the span condition for skinny orthonormal banks") {
  // tokens live on e2 but the single basis direction is e1
  Matrix z(3, 2);
  z(1, 0) = 1.0;
  z(1, 1) = -2.0;
  Matrix u(3, 1);
  u(0, 0) = 1.0;
  CHECK_THROWS_AS(variational_bound_gap(z, uniform_membership(2, 1), bank_of({u}),
                                        SpectralFn{1.0}),
                  PreconditionError);

  // non-orthonormal banks skip the check entirely
  Matrix w(3, 1);
  w(0, 0) = 2.0;
  const double gap = variational_bound_gap(z, uniform_membership(2, 1), bank_of({w}),
                                           SpectralFn{1.0});
  CHECK(std::isfinite(gap));
}

TEST_CASE("gradient closed form, scalar case") {
  Matrix z(1, 1);
  z(0, 0) = 2.0;
  const Matrix g = grad_variational(z, uniform_membership(1, 1),
                                    bank_of({Matrix::identity(1)}), SpectralFn{1.0});
  CHECK(g(0, 0) == doctest::Approx(0.4).epsilon(1e-14));

  const Matrix zero = grad_variational(Matrix(3, 4), uniform_membership(4, 2),
                                       bank_of({random_orthonormal(3, 2, 0),
                                                random_orthonormal(3, 2, 1)}),
                                       SpectralFn{2.0});
  CHECK(max_abs(zero) == 0.0);
}

namespace {

double fd_rel_error(const Matrix& z, const Membership& pi, const ProjectionBank& bank,
                    const SpectralFn& f) {
  const Matrix ga = grad_variational(z, pi, bank, f);
  Matrix gn(z.rows(), z.cols());
  Matrix zp = z;
  const double h = 1e-5;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) {
      zp(i, j) = z(i, j) + h;
      const double up = variational_compression(zp, pi, bank, f);
      zp(i, j) = z(i, j) - h;
      const double down = variational_compression(zp, pi, bank, f);
      zp(i, j) = z(i, j);
      gn(i, j) = (up - down) / (2.0 * h);
    }
  return max_abs_diff(ga, gn) / std::max(max_abs(gn), 1e-12);
}

}  // namespace

TEST_CASE("gradient matches central finite differences") {
  Rng rng(31);
  const Matrix z = gaussian(4, 6, rng);
  const Membership pi = soft_membership(6, 2, rng);
  ProjectionBank bank;
  bank.bases.push_back(random_orthonormal(4, 3, rng));
  bank.bases.push_back(random_orthonormal(4, 3, rng));
  CHECK(fd_rel_error(z, pi, bank, SpectralFn{4.0}) <= 1e-5);
}

TEST_CASE("single-group gradient with the identity bank") {
  Rng rng(37);
  const Matrix z = gaussian(5, 8, rng);
  const SpectralFn f{5.0};
  CHECK(fd_rel_error(z, uniform_membership(8, 1), bank_of({Matrix::identity(5)}), f) <=
        1e-5);
}

TEST_CASE("empty group contributes nothing") {
  Rng rng(41);
  const Matrix z = gaussian(3, 5, rng);
  const SpectralFn f{3.0};

  // column 0 carries no mass; column 1 holds every token
  Membership lop;
  lop.pi = Matrix(5, 2);
  for (std::size_t j = 0; j < 5; ++j) lop.pi(j, 1) = 1.0;

  CHECK(std::abs(general_compression(z, lop, f) -
                 general_compression(z, uniform_membership(5, 1), f)) <= 1e-12);

  ProjectionBank bank;
  bank.bases.push_back(random_orthonormal(3, 2, rng));
  bank.bases.push_back(random_orthonormal(3, 2, rng));
  ProjectionBank solo;
  solo.bases.push_back(bank.bases[1]);
  const Matrix g2 = grad_variational(z, lop, bank, f);
  const Matrix g1 = grad_variational(z, uniform_membership(5, 1), solo, f);
  CHECK(max_abs_diff(g2, g1) <= 1e-14);
}
