#include <cmath>
#include <cstddef>
#include <vector>

#include <doctest.h>

#include "tost/alloc_stats.hpp"
#include "tost/coding_rate.hpp"
#include "tost/error.hpp"
#include "tost/linalg.hpp"
#include "tost/matrix.hpp"
#include "tost/rng.hpp"
#include "tost/tssa.hpp"

namespace {

tost::Matrix gaussian(std::size_t r, std::size_t c, tost::Rng& rng) {
  tost::Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

tost::ProjectionBank random_bank(std::size_t d, std::size_t p, std::size_t k,
                                 std::uint64_t seed) {
  tost::ProjectionBank bank;
  for (std::size_t g = 0; g < k; ++g)
    bank.bases.push_back(tost::random_orthonormal(d, p, seed + g));
  return bank;
}

tost::Matrix swap_cols(const tost::Matrix& m, std::size_t a, std::size_t b) {
  tost::Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) std::swap(out(i, a), out(i, b));
  return out;
}

tost::Matrix swap_rows(const tost::Matrix& m, std::size_t a, std::size_t b) {
  tost::Matrix out = m;
  for (std::size_t j = 0; j < m.cols(); ++j) std::swap(out(a, j), out(b, j));
  return out;
}

}  // namespace

TEST_CASE("diag_gate on zero tokens returns alpha everywhere") {
  tost::Matrix z(3, 5);
  tost::Matrix u = tost::random_orthonormal(3, 2, 0);
  std::vector<double> pi(5, 1.0);
  tost::SpectralFn f{2.5};
  const std::vector<double> gate = tost::diag_gate(z, pi, u, f);
  REQUIRE(gate.size() == 2);
  for (double g : gate) CHECK(g == 2.5);
}

TEST_CASE("diag_gate hand-computed moments") {
  // Identity basis, tokens (1,0) and (3,0), unit weights: the first direction
  // sees second moment (1 + 9)/2 = 5, the second sees 0.
  tost::Matrix z(2, 2);
  z(0, 0) = 1.0;
  z(0, 1) = 3.0;
  tost::Matrix u(2, 2);
  u(0, 0) = 1.0;
  u(1, 1) = 1.0;
  std::vector<double> pi{1.0, 1.0};
  tost::SpectralFn f{1.0};
  const std::vector<double> gate = tost::diag_gate(z, pi, u, f);
  CHECK(gate[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(gate[1] == 1.0);
}

TEST_CASE("diag_gate values lie in (0, alpha] and shrink as moments grow") {
  tost::Rng rng(11);
  tost::Matrix z = gaussian(4, 9, rng);
  tost::Matrix u = tost::random_orthonormal(4, 3, 1);
  std::vector<double> pi(9);
  for (double& w : pi) w = rng.uniform() + 0.1;
  tost::SpectralFn f{3.0};
  const std::vector<double> gate = tost::diag_gate(z, pi, u, f);
  for (double g : gate) {
    CHECK(g > 0.0);
    CHECK(g <= 3.0);
  }
  // Scaling the tokens up raises every moment, so every gate entry drops.
  tost::Matrix z2 = z;
  z2 *= 2.0;
  const std::vector<double> gate2 = tost::diag_gate(z2, pi, u, f);
  for (std::size_t i = 0; i < gate.size(); ++i) CHECK(gate2[i] < gate[i]);
}

TEST_CASE("diag_gate rejects zero-mass weights") {
  tost::Rng rng(2);
  tost::Matrix z = gaussian(3, 4, rng);
  tost::Matrix u = tost::random_orthonormal(3, 2, 3);
  std::vector<double> pi(4, 0.0);
  CHECK_THROWS_AS(tost::diag_gate(z, pi, u, tost::SpectralFn{1.0}),
                  tost::DegenerateGroupError);
  pi[0] = -0.5;
  CHECK_THROWS_AS(tost::diag_gate(z, pi, u, tost::SpectralFn{1.0}),
                  tost::ValidationError);
}

TEST_CASE("membership is uniform when heads are indistinguishable") {
  const std::size_t d = 6, p = 2, n = 7;
  tost::Rng rng(5);
  tost::Matrix z = gaussian(d, n, rng);
  tost::Matrix u = tost::random_orthonormal(d, p, 8);
  tost::ProjectionBank bank;
  bank.bases = {u, u};  // identical heads: every logit ties
  for (bool normalize : {true, false}) {
    tost::TssaParams prm = tost::TssaParams::for_dim(d);
    prm.normalize_membership = normalize;
    const tost::Membership pi = tost::estimate_membership(z, bank, prm);
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(pi.pi(j, 0) == 0.5);
      CHECK(pi.pi(j, 1) == 0.5);
    }
  }
}

TEST_CASE("membership of zero tokens is uniform over heads") {
  const std::size_t d = 5, p = 2, k = 3;
  tost::Matrix z(d, 4);
  tost::ProjectionBank bank = random_bank(d, p, k, 21);
  for (bool normalize : {true, false}) {
    tost::TssaParams prm = tost::TssaParams::for_dim(d);
    prm.normalize_membership = normalize;
    const tost::Membership pi = tost::estimate_membership(z, bank, prm);
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t g = 0; g < k; ++g)
        CHECK(pi.pi(j, g) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }
}

TEST_CASE("high temperature flattens membership toward uniform") {
  const std::size_t d = 8, p = 3, k = 4, n = 10;
  tost::Rng rng(9);
  tost::Matrix z = gaussian(d, n, rng);
  tost::ProjectionBank bank = random_bank(d, p, k, 31);
  tost::TssaParams prm = tost::TssaParams::for_dim(d);
  prm.eta = 1e12;
  const tost::Membership pi = tost::estimate_membership(z, bank, prm);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t g = 0; g < k; ++g)
      CHECK(pi.pi(j, g) == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("membership rows sum to one") {
  const std::size_t d = 7, p = 2, k = 3, n = 12;
  tost::Rng rng(13);
  tost::Matrix z = gaussian(d, n, rng);
  tost::ProjectionBank bank = random_bank(d, p, k, 41);
  for (bool normalize : {true, false}) {
    tost::TssaParams prm = tost::TssaParams::for_dim(d);
    prm.normalize_membership = normalize;
    const tost::Membership pi = tost::estimate_membership(z, bank, prm);
    for (std::size_t j = 0; j < n; ++j) {
      double row = 0.0;
      for (std::size_t g = 0; g < k; ++g) {
        CHECK(pi.pi(j, g) >= 0.0);
        row += pi.pi(j, g);
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("attention on zero tokens is zero") {
  const std::size_t d = 6, p = 2, k = 2;
  tost::Matrix z(d, 5);
  tost::ProjectionBank bank = random_bank(d, p, k, 51);
  const tost::Matrix out =
      tost::tssa_attention(z, bank, tost::TssaParams::for_dim(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(out(i, j) == 0.0);
}

TEST_CASE("attention equals the scaled objective gradient at its own membership") {
  tost::Rng dims(17);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t d = 2 + dims.next_u64() % 7;
    const std::size_t n = 1 + dims.next_u64() % 9;
    const std::size_t k = 1 + dims.next_u64() % 3;
    const std::size_t p = 1 + dims.next_u64() % std::min<std::size_t>(d, 3);
    tost::Rng rng(100 + trial);
    tost::Matrix z = gaussian(d, n, rng);
    tost::ProjectionBank bank = random_bank(d, p, k, 200 + 10 * trial);
    tost::TssaParams prm = tost::TssaParams::for_dim(d, 0.5 + 1.5 * rng.uniform());
    prm.tau = 0.25 + 1.75 * rng.uniform();
    prm.eta = 0.5 + 1.5 * rng.uniform();
    prm.normalize_membership = (trial % 2 == 0);
    const tost::Matrix attn = tost::tssa_attention(z, bank, prm);
    const tost::Membership pi = tost::estimate_membership(z, bank, prm);
    const tost::Matrix grad = tost::grad_variational(z, pi, bank, prm.f);
    tost::Matrix expect = grad;
    expect *= -prm.tau;
    CHECK(max_abs_diff(attn, expect) <= 1e-10);
  }
}

TEST_CASE("attention matches the per-token update form") {
  tost::Rng dims(23);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t d = 3 + dims.next_u64() % 6;
    const std::size_t n = 2 + dims.next_u64() % 8;
    const std::size_t k = 1 + dims.next_u64() % 3;
    const std::size_t p = 1 + dims.next_u64() % std::min<std::size_t>(d, 3);
    tost::Rng rng(300 + trial);
    tost::Matrix z = gaussian(d, n, rng);
    tost::ProjectionBank bank = random_bank(d, p, k, 400 + 10 * trial);
    tost::TssaParams prm = tost::TssaParams::for_dim(d);
    prm.tau = 0.5 + rng.uniform();
    const tost::Matrix attn = tost::tssa_attention(z, bank, prm);
    const tost::Membership pi = tost::estimate_membership(z, bank, prm);

    // Column j of the output, assembled head by head from the gate form.
    tost::Matrix expect(d, n);
    for (std::size_t g = 0; g < k; ++g) {
      std::vector<double> w(n);
      for (std::size_t j = 0; j < n; ++j) w[j] = pi.pi(j, g);
      const std::vector<double> gate = tost::diag_gate(z, w, bank.bases[g], prm.f);
      const tost::Matrix proj = tost::multiply_at_b(bank.bases[g], z);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t r = 0; r < d; ++r) {
          double acc = 0.0;
          for (std::size_t i = 0; i < p; ++i)
            acc += bank.bases[g](r, i) * gate[i] * proj(i, j);
          expect(r, j) += acc * w[j];
        }
    }
    expect *= -prm.tau / static_cast<double>(n);
    CHECK(max_abs_diff(attn, expect) <= 1e-10);
  }
}

TEST_CASE("output W equal to the scaled stacked bank reproduces the bank form") {
  const std::size_t d = 7, p = 2, k = 3, n = 9;
  tost::Rng rng(29);
  tost::Matrix z = gaussian(d, n, rng);
  tost::ProjectionBank bank = random_bank(d, p, k, 61);
  tost::TssaParams prm = tost::TssaParams::for_dim(d);
  prm.tau = 1.3;
  const tost::Matrix plain = tost::tssa_attention(z, bank, prm);

  tost::Matrix w(d, p * k);
  for (std::size_t g = 0; g < k; ++g)
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t i = 0; i < p; ++i)
        w(r, g * p + i) = prm.tau / static_cast<double>(n) * bank.bases[g](r, i);
  tost::TssaParams with_w = prm;
  with_w.w = w;
  const tost::Matrix learned = tost::tssa_attention(z, bank, with_w);
  CHECK(max_abs_diff(plain, learned) <= 1e-12);
}

TEST_CASE("attention commutes with token transpositions") {
  const std::size_t d = 6, p = 2, k = 3, n = 6;
  tost::Rng rng(37);
  tost::Matrix z = gaussian(d, n, rng);
  tost::ProjectionBank bank = random_bank(d, p, k, 71);
  tost::TssaParams prm = tost::TssaParams::for_dim(d);
  const tost::Matrix base_attn = tost::tssa_attention(z, bank, prm);
  const tost::Membership base_pi = tost::estimate_membership(z, bank, prm);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const tost::Matrix zs = swap_cols(z, a, b);
      const tost::Matrix attn = tost::tssa_attention(zs, bank, prm);
      const tost::Membership pi = tost::estimate_membership(zs, bank, prm);
      CHECK(max_abs_diff(attn, swap_cols(base_attn, a, b)) <= 1e-12);
      CHECK(max_abs_diff(pi.pi, swap_rows(base_pi.pi, a, b)) <= 1e-12);
    }
}

TEST_CASE("token_update adds the attention output to the input") {
  const std::size_t d = 5, p = 2, k = 2, n = 6;
  tost::Rng rng(41);
  tost::Matrix z = gaussian(d, n, rng);
  tost::ProjectionBank bank = random_bank(d, p, k, 81);
  tost::TssaParams prm = tost::TssaParams::for_dim(d);
  const tost::Matrix attn = tost::tssa_attention(z, bank, prm);
  const tost::Matrix next = tost::token_update(z, bank, prm);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < n; ++j)
      CHECK(next(i, j) == z(i, j) + attn(i, j));

  tost::Matrix zero(d, n);
  const tost::Matrix still = tost::token_update(zero, bank, prm);
  CHECK(max_abs_diff(still, zero) == 0.0);
}

TEST_CASE("small steps decrease the compression term at frozen membership") {
  tost::Rng dims(47);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 3 + dims.next_u64() % 6;
    const std::size_t n = 2 + dims.next_u64() % 10;
    const std::size_t k = 1 + dims.next_u64() % 3;
    const std::size_t p = 1 + dims.next_u64() % std::min<std::size_t>(d, 3);
    tost::Rng rng(500 + trial);
    tost::Matrix z = gaussian(d, n, rng);
    tost::ProjectionBank bank = random_bank(d, p, k, 600 + 10 * trial);
    tost::TssaParams prm = tost::TssaParams::for_dim(d);
    prm.tau = 1e-3 / prm.f.alpha;
    const tost::Membership pi = tost::estimate_membership(z, bank, prm);
    const tost::Matrix grad = tost::grad_variational(z, pi, bank, prm.f);
    if (frobenius(grad) < 1e-9) continue;
    const double before = tost::variational_compression(z, pi, bank, prm.f);
    const tost::Matrix next = tost::token_update(z, bank, prm);
    const double after = tost::variational_compression(next, pi, bank, prm.f);
    CHECK(after <= before - 1e-12);
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("attention working set stays linear in token count") {
  const std::size_t d = 16, p = 4, k = 4;
  tost::TssaParams prm = tost::TssaParams::for_dim(d);
  const auto peak_for = [&](std::size_t n) {
    tost::Rng rng(53);
    tost::Matrix z = gaussian(d, n, rng);
    tost::ProjectionBank bank = random_bank(d, p, k, 91);
    tost::alloc_stats::reset();
    const tost::Matrix out = tost::tssa_attention(z, bank, prm);
    const std::size_t peak = tost::alloc_stats::peak_bytes();
    CHECK(out.cols() == n);
    return peak;
  };
  const std::size_t peak256 = peak_for(256);
  const std::size_t peak512 = peak_for(512);
  tost::alloc_stats::reset();
  // Stacked projections + output + membership + per-token scratch, with slack.
  const std::size_t budget = 8 * 256 * (k * p + d + k + 2) + 4096;
  CHECK(peak256 <= budget);
  CHECK(static_cast<double>(peak512) <= 2.2 * static_cast<double>(peak256));
}

TEST_CASE("attention rejects malformed parameters and inputs") {
  const std::size_t d = 4, p = 2, k = 2, n = 3;
  tost::Rng rng(59);
  tost::Matrix z = gaussian(d, n, rng);
  tost::ProjectionBank bank = random_bank(d, p, k, 101);

  tost::TssaParams bad_tau = tost::TssaParams::for_dim(d);
  bad_tau.tau = 0.0;
  CHECK_THROWS_AS(tost::tssa_attention(z, bank, bad_tau), tost::ValidationError);

  tost::TssaParams bad_eta = tost::TssaParams::for_dim(d);
  bad_eta.eta = -1.0;
  CHECK_THROWS_AS(tost::tssa_attention(z, bank, bad_eta), tost::ValidationError);

  tost::TssaParams bad_w = tost::TssaParams::for_dim(d);
  bad_w.w = tost::Matrix(d, p * k + 1);
  CHECK_THROWS_AS(tost::tssa_attention(z, bank, bad_w), tost::DimensionError);

  tost::Matrix z_nan = z;
  z_nan(1, 1) = std::nan("");
  CHECK_THROWS_AS(tost::tssa_attention(z_nan, bank, tost::TssaParams::for_dim(d)),
                  tost::ValidationError);

  CHECK_THROWS_AS(tost::tssa_attention(z, tost::ProjectionBank{},
                                       tost::TssaParams::for_dim(d)),
                  tost::DimensionError);
}
