#pragma once

// Scalar-templated forward kernels shared by the double-precision API and the
// single-precision benchmark path. All matrices are row-major raw buffers;
// shape and hyperparameter plumbing lives in the public wrappers.

#include <cmath>
#include <cstddef>
#include <vector>

#include "tost/alloc_stats.hpp"
#include "tost/threads.hpp"

namespace tost::detail {

template <typename T>
using buf = alloc_stats::tracked_vector<T>;

template <typename T>
struct AttnParams {
  std::size_t d = 0, n = 0, heads = 0, p = 0;
  T tau{1}, eta{1}, alpha{1};
  bool normalize = true;
  T norm_eps = T(1e-12);
  const T* w = nullptr;  // optional d x (p*heads); null selects the bank form
};

inline constexpr double kEmptyHead = 1e-12;

// proj holds `heads` consecutive p x n blocks: block k = U_k^T Z.
template <typename T>
void project_heads(const AttnParams<T>& a, const T* z, const T* const* bank, T* proj) {
  parallel_chunks(0, a.heads, [&](std::size_t klo, std::size_t khi) {
    for (std::size_t k = klo; k < khi; ++k) {
      T* pk = proj + k * a.p * a.n;
      for (std::size_t t = 0; t < a.p * a.n; ++t) pk[t] = T(0);
      const T* u = bank[k];
      for (std::size_t r = 0; r < a.d; ++r) {
        const T* zr = z + r * a.n;
        const T* ur = u + r * a.p;
        for (std::size_t i = 0; i < a.p; ++i) {
          const T c = ur[i];
          if (c == T(0)) continue;
          T* dst = pk + i * a.n;
          for (std::size_t j = 0; j < a.n; ++j) dst[j] += c * zr[j];
        }
      }
    }
  });
}

// pi: n x heads, row-stochastic. bias (optional): n x heads, added pre-softmax.
template <typename T>
void membership_from_proj(const AttnParams<T>& a, const T* proj, const T* bias, T* pi) {
  const std::size_t kk = a.heads;
  for (std::size_t t = 0; t < a.n * kk; ++t) pi[t] = T(0);
  buf<T> y(a.p);
  for (std::size_t k = 0; k < kk; ++k) {
    const T* pk = proj + k * a.p * a.n;
    if (a.normalize) {
      for (std::size_t i = 0; i < a.p; ++i) {
        T sq = T(0);
        const T* row = pk + i * a.n;
        for (std::size_t j = 0; j < a.n; ++j) sq += row[j] * row[j];
        const T norm = std::sqrt(sq);
        y[i] = norm < a.norm_eps ? T(1) / a.norm_eps : T(1) / norm;
      }
    }
    for (std::size_t i = 0; i < a.p; ++i) {
      const T* row = pk + i * a.n;
      const T yi = a.normalize ? y[i] : T(1);
      for (std::size_t j = 0; j < a.n; ++j) {
        const T v = row[j] * yi;
        pi[j * kk + k] += v * v;
      }
    }
  }
  const T inv2eta = T(1) / (T(2) * a.eta);
  for (std::size_t j = 0; j < a.n; ++j) {
    T* row = pi + j * kk;
    T mx = row[0] * inv2eta + (bias ? bias[j * kk] : T(0));
    for (std::size_t k = 0; k < kk; ++k) {
      row[k] = row[k] * inv2eta + (bias ? bias[j * kk + k] : T(0));
      mx = std::max(mx, row[k]);
    }
    T sum = T(0);
    for (std::size_t k = 0; k < kk; ++k) {
      row[k] = std::exp(row[k] - mx);
      sum += row[k];
    }
    for (std::size_t k = 0; k < kk; ++k) row[k] /= sum;
  }
}

template <typename T>
void tssa_membership(const AttnParams<T>& a, const T* z, const T* const* bank, T* pi) {
  buf<T> proj(a.heads * a.p * a.n);
  project_heads(a, z, bank, proj.data());
  membership_from_proj(a, proj.data(), static_cast<const T*>(nullptr), pi);
}

// out: d x n. pi_out (optional): receives the internally estimated membership.
template <typename T>
void tssa_forward(const AttnParams<T>& a, const T* z, const T* const* bank, T* out,
                  T* pi_out = nullptr) {
  const std::size_t kk = a.heads;
  buf<T> proj(kk * a.p * a.n);
  buf<T> pi(a.n * kk);
  buf<T> col(a.n);

  project_heads(a, z, bank, proj.data());
  membership_from_proj(a, proj.data(), static_cast<const T*>(nullptr), pi.data());
  if (pi_out)
    for (std::size_t t = 0; t < a.n * kk; ++t) pi_out[t] = pi[t];

  for (std::size_t k = 0; k < kk; ++k) {
    T* pk = proj.data() + k * a.p * a.n;
    T mass = T(0);
    for (std::size_t j = 0; j < a.n; ++j) {
      col[j] = pi[j * kk + k];
      mass += col[j];
    }
    if (mass < T(kEmptyHead)) {
      // head carries no tokens; zero its gated projections
      for (std::size_t t = 0; t < a.p * a.n; ++t) pk[t] = T(0);
      continue;
    }
    for (std::size_t i = 0; i < a.p; ++i) {
      T* row = pk + i * a.n;
      T moment = T(0);
      for (std::size_t j = 0; j < a.n; ++j) moment += row[j] * row[j] * col[j];
      const T g = a.alpha / (T(1) + a.alpha * (moment / mass));
      for (std::size_t j = 0; j < a.n; ++j) row[j] *= g * col[j];
    }
  }

  const T scale = a.w ? T(-1) : -a.tau / T(a.n);
  parallel_chunks(0, a.n, [&](std::size_t jlo, std::size_t jhi) {
    for (std::size_t r = 0; r < a.d; ++r)
      for (std::size_t j = jlo; j < jhi; ++j) out[r * a.n + j] = T(0);
    for (std::size_t k = 0; k < kk; ++k) {
      const T* pk = proj.data() + k * a.p * a.n;
      for (std::size_t r = 0; r < a.d; ++r) {
        const T* lr = a.w ? a.w + r * (a.p * kk) + k * a.p : bank[k] + r * a.p;
        T* outr = out + r * a.n;
        for (std::size_t i = 0; i < a.p; ++i) {
          const T c = lr[i];
          if (c == T(0)) continue;
          const T* src = pk + i * a.n;
          for (std::size_t j = jlo; j < jhi; ++j) outr[j] += c * src[j];
        }
      }
    }
    for (std::size_t r = 0; r < a.d; ++r)
      for (std::size_t j = jlo; j < jhi; ++j) out[r * a.n + j] *= scale;
  });
}

// One-token-at-a-time causal recurrence. Batch mode pushes every column of Z
// through the same object, so streaming and batch outputs match bitwise.
template <typename T>
struct CausalStream {
  AttnParams<T> a;
  std::vector<const T*> bank;
  buf<T> sumsq;  // heads*p: running row-wise sums of squared projections
  buf<T> swt;    // heads*p: running membership-weighted squared projections
  buf<T> mass;   // heads:   running membership totals
  buf<T> q;      // heads*p: current token's projections
  buf<T> pirow;  // heads
  std::size_t pos = 0;

  CausalStream(const AttnParams<T>& params, const T* const* bank_ptrs)
      : a(params),
        bank(bank_ptrs, bank_ptrs + params.heads),
        sumsq(params.heads * params.p, T(0)),
        swt(params.heads * params.p, T(0)),
        mass(params.heads, T(0)),
        q(params.heads * params.p, T(0)),
        pirow(params.heads, T(0)) {}

  // z_col: d values. bias_row: heads values or null. out_col: d values.
  // pi_row_out (optional): the token's membership row.
  void push(const T* z_col, const T* bias_row, T* out_col, T* pi_row_out = nullptr) {
    const std::size_t kk = a.heads;
    pos += 1;

    for (std::size_t t = 0; t < kk * a.p; ++t) q[t] = T(0);
    for (std::size_t k = 0; k < kk; ++k) {
      const T* u = bank[k];
      T* qk = q.data() + k * a.p;
      for (std::size_t r = 0; r < a.d; ++r) {
        const T zr = z_col[r];
        if (zr == T(0)) continue;
        const T* ur = u + r * a.p;
        for (std::size_t i = 0; i < a.p; ++i) qk[i] += ur[i] * zr;
      }
    }
    for (std::size_t t = 0; t < kk * a.p; ++t) sumsq[t] += q[t] * q[t];

    const T inv2eta = T(1) / (T(2) * a.eta);
    T mx = T(0);
    for (std::size_t k = 0; k < kk; ++k) {
      const T* qk = q.data() + k * a.p;
      const T* sk = sumsq.data() + k * a.p;
      T logit = T(0);
      for (std::size_t i = 0; i < a.p; ++i) {
        T v = qk[i];
        if (a.normalize) {
          const T norm = std::sqrt(sk[i]);
          v *= norm < a.norm_eps ? T(1) / a.norm_eps : T(1) / norm;
        }
        logit += v * v;
      }
      logit = logit * inv2eta + (bias_row ? bias_row[k] : T(0));
      pirow[k] = logit;
      mx = k == 0 ? logit : std::max(mx, logit);
    }
    T sum = T(0);
    for (std::size_t k = 0; k < kk; ++k) {
      pirow[k] = std::exp(pirow[k] - mx);
      sum += pirow[k];
    }
    for (std::size_t k = 0; k < kk; ++k) pirow[k] /= sum;
    if (pi_row_out)
      for (std::size_t k = 0; k < kk; ++k) pi_row_out[k] = pirow[k];

    for (std::size_t k = 0; k < kk; ++k) {
      mass[k] += pirow[k];
      const T* qk = q.data() + k * a.p;
      T* wk = swt.data() + k * a.p;
      for (std::size_t i = 0; i < a.p; ++i) wk[i] += pirow[k] * qk[i] * qk[i];
    }

    for (std::size_t r = 0; r < a.d; ++r) out_col[r] = T(0);
    for (std::size_t k = 0; k < kk; ++k) {
      if (mass[k] < T(kEmptyHead)) continue;  // same empty-head rule as batch tssa
      T* qk = q.data() + k * a.p;  // reused in place for the gated values
      const T* wk = swt.data() + k * a.p;
      for (std::size_t i = 0; i < a.p; ++i) {
        const T g = a.alpha / (T(1) + a.alpha * (wk[i] / mass[k]));
        qk[i] *= pirow[k] * g;
      }
      if (a.w) {
        for (std::size_t r = 0; r < a.d; ++r) {
          const T* wr = a.w + r * (a.p * kk) + k * a.p;
          T acc = T(0);
          for (std::size_t i = 0; i < a.p; ++i) acc += wr[i] * qk[i];
          out_col[r] += acc;
        }
      } else {
        const T* u = bank[k];
        for (std::size_t r = 0; r < a.d; ++r) {
          const T* ur = u + r * a.p;
          T acc = T(0);
          for (std::size_t i = 0; i < a.p; ++i) acc += ur[i] * qk[i];
          out_col[r] += acc;
        }
      }
    }
    const T scale = a.w ? T(-1) : -a.tau / T(pos);
    for (std::size_t r = 0; r < a.d; ++r) out_col[r] *= scale;
  }
};

// Batch causal forward: column j of out depends on columns 0..j of z only.
// bias: n x heads or null. pi_out (optional): n x heads membership.
template <typename T>
void causal_forward(const AttnParams<T>& a, const T* z, const T* const* bank,
                    const T* bias, T* out, T* pi_out = nullptr) {
  CausalStream<T> stream(a, bank);
  buf<T> zcol(a.d);
  buf<T> ocol(a.d);
  for (std::size_t j = 0; j < a.n; ++j) {
    for (std::size_t r = 0; r < a.d; ++r) zcol[r] = z[r * a.n + j];
    stream.push(zcol.data(), bias ? bias + j * a.heads : nullptr, ocol.data(),
                pi_out ? pi_out + j * a.heads : nullptr);
    for (std::size_t r = 0; r < a.d; ++r) out[r * a.n + j] = ocol[r];
  }
}

// Quadratic-cost baseline: out = Wv^T Z * softmax_rows((Wq^T Z)^T (Wk^T Z)/sqrt(p))^T.
// wq, wk, wv: d x p. out: p x n. Materializes the n x n attention matrix.
template <typename T>
void sdpa_forward(const T* z, const T* wq, const T* wk, const T* wv,
                  std::size_t d, std::size_t p, std::size_t n, T* out) {
  buf<T> qkv(3 * p * n);
  T* q = qkv.data();
  T* ks = qkv.data() + p * n;
  T* v = qkv.data() + 2 * p * n;
  const T* mats[3] = {wq, wk, wv};
  T* dsts[3] = {q, ks, v};
  for (int m = 0; m < 3; ++m) {
    T* dst = dsts[m];
    for (std::size_t t = 0; t < p * n; ++t) dst[t] = T(0);
    for (std::size_t r = 0; r < d; ++r) {
      const T* zr = z + r * n;
      const T* wr = mats[m] + r * p;
      for (std::size_t i = 0; i < p; ++i) {
        const T c = wr[i];
        if (c == T(0)) continue;
        T* drow = dst + i * n;
        for (std::size_t j = 0; j < n; ++j) drow[j] += c * zr[j];
      }
    }
  }

  buf<T> attn(n * n);
  for (std::size_t t = 0; t < n * n; ++t) attn[t] = T(0);
  const T inv_sqrt_p = T(1) / std::sqrt(T(p));
  for (std::size_t r = 0; r < p; ++r) {
    const T* qr = q + r * n;
    const T* kr = ks + r * n;
    for (std::size_t i = 0; i < n; ++i) {
      const T c = qr[i] * inv_sqrt_p;
      if (c == T(0)) continue;
      T* arow = attn.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) arow[j] += c * kr[j];
    }
  }
  parallel_chunks(0, n, [&](std::size_t ilo, std::size_t ihi) {
    for (std::size_t i = ilo; i < ihi; ++i) {
      T* row = attn.data() + i * n;
      T mx = row[0];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
      T sum = T(0);
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
      }
      for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
    }
  });
  // out = V A^T: out(r, j) = dot(V row r, A row j)
  parallel_chunks(0, n, [&](std::size_t jlo, std::size_t jhi) {
    for (std::size_t r = 0; r < p; ++r) {
      const T* vr = v + r * n;
      T* outr = out + r * n;
      for (std::size_t j = jlo; j < jhi; ++j) {
        const T* aj = attn.data() + j * n;
        T acc = T(0);
        for (std::size_t t = 0; t < n; ++t) acc += vr[t] * aj[t];
        outr[j] = acc;
      }
    }
  });
}

}  // namespace tost::detail
