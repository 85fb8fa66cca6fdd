#include "tost/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "tost/alloc_stats.hpp"
#include "tost/detail/kernels.hpp"
#include "tost/error.hpp"
#include "tost/linalg.hpp"
#include "tost/rng.hpp"
#include "tost/threads.hpp"
#include "tost/tssa.hpp"

namespace tost {

SynthData synth_subspaces(const SynthSpec& spec) {
  if (spec.d == 0 || spec.p == 0 || spec.heads == 0 || spec.tokens_per_group == 0)
    throw SpecError("synth_subspaces: dimensions must be >= 1");
  if (spec.p * spec.heads > spec.d)
    throw SpecError("synth_subspaces: p*K = " + std::to_string(spec.p * spec.heads) +
                    " exceeds d = " + std::to_string(spec.d) +
                    "; orthogonal subspaces do not fit");
  if (spec.noise_std < 0.0) throw SpecError("synth_subspaces: noise_std must be >= 0");

  Rng rng(spec.seed);
  const Matrix q = random_orthonormal(spec.d, spec.d, rng);

  SynthData data;
  data.bases.bases.reserve(spec.heads);
  for (std::size_t k = 0; k < spec.heads; ++k) {
    Matrix u(spec.d, spec.p);
    for (std::size_t i = 0; i < spec.d; ++i)
      for (std::size_t j = 0; j < spec.p; ++j) u(i, j) = q(i, k * spec.p + j);
    data.bases.bases.push_back(std::move(u));
  }

  const std::size_t n = spec.heads * spec.tokens_per_group;
  data.z = Matrix(spec.d, n);
  data.labels.reserve(n);
  std::size_t col = 0;
  std::vector<double> coeff(spec.p);
  for (std::size_t k = 0; k < spec.heads; ++k) {
    const Matrix& u = data.bases.bases[k];
    for (std::size_t t = 0; t < spec.tokens_per_group; ++t, ++col) {
      for (std::size_t j = 0; j < spec.p; ++j) coeff[j] = rng.normal();
      for (std::size_t i = 0; i < spec.d; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < spec.p; ++j) v += u(i, j) * coeff[j];
        data.z(i, col) = v + spec.noise_std * rng.normal();
      }
      data.labels.push_back(k);
    }
  }
  return data;
}

Matrix baseline_sdpa(const Matrix& z, const Matrix& wq, const Matrix& wk,
                     const Matrix& wv) {
  if (z.rows() == 0 || z.cols() == 0)
    throw DimensionError("baseline_sdpa: token matrix must be nonempty");
  if (!all_finite(z)) throw ValidationError("baseline_sdpa: non-finite tokens");
  const std::size_t d = z.rows();
  const std::size_t p = wq.cols();
  for (const Matrix* m : {&wq, &wk, &wv}) {
    if (m->rows() != d || m->cols() != p || p == 0)
      throw DimensionError("baseline_sdpa: projection matrices must share shape d x p");
    if (!all_finite(*m)) throw ValidationError("baseline_sdpa: non-finite projections");
  }
  Matrix out(p, z.cols());
  detail::sdpa_forward<double>(z.data(), wq.data(), wk.data(), wv.data(), d, p,
                               z.cols(), out.data());
  return out;
}

std::vector<double> layerwise_trace(const Matrix& z0, std::size_t heads,
                                    std::size_t p, std::size_t depth, double tau,
                                    LayerwiseMode mode, std::uint64_t bank_seed) {
  if (z0.rows() == 0 || z0.cols() == 0)
    throw DimensionError("layerwise_trace: token matrix must be nonempty");
  if (heads == 0 || p == 0 || p > z0.rows())
    throw DimensionError("layerwise_trace: need heads >= 1 and 1 <= p <= d");

  TssaParams params = TssaParams::for_dim(z0.rows());
  params.tau = tau;

  Rng rng(bank_seed);
  ProjectionBank bank;
  bank.bases.reserve(heads);
  for (std::size_t k = 0; k < heads; ++k)
    bank.bases.push_back(random_orthonormal(z0.rows(), p, rng));

  Matrix z = z0;
  std::vector<double> trace;
  trace.reserve(depth + 1);

  // Unrecorded burn-in refresh so the first recorded membership comes from an
  // oracle-quality bank, like every later one; the random bank only breaks the
  // head symmetry.
  if (mode == LayerwiseMode::oracle)
    bank = oracle_bases(z, estimate_membership(z, bank, params), p);

  for (std::size_t step = 0; step <= depth; ++step) {
    // Each layer estimates membership once, with the bank it starts from; the
    // oracle refresh and the update both reuse that estimate.
    const Membership pi = estimate_membership(z, bank, params);
    if (mode == LayerwiseMode::oracle) bank = oracle_bases(z, pi, p);
    trace.push_back(variational_compression(z, pi, bank, params.f));
    if (step < depth) {
      const Matrix g = grad_variational(z, pi, bank, params.f);
      z += (-params.tau) * g;
    }
  }
  return trace;
}

std::vector<double> layerwise_experiment(const SynthSpec& spec, std::size_t depth,
                                         double tau, LayerwiseMode mode) {
  const SynthData data = synth_subspaces(spec);
  return layerwise_trace(data.z, spec.heads, spec.p, depth, tau, mode, spec.seed + 1);
}

const char* bench_op_name(BenchOp op) {
  switch (op) {
    case BenchOp::tssa: return "tssa_attention";
    case BenchOp::causal_tssa: return "causal_tssa_attention";
    case BenchOp::sdpa: return "baseline_sdpa";
  }
  return "unknown";
}

namespace {

struct ThreadCountGuard {
  int saved;
  explicit ThreadCountGuard(int want) : saved(threads()) { set_threads(want); }
  ~ThreadCountGuard() { set_threads(saved); }
};

struct BenchInputs {
  Matrix z;
  ProjectionBank bank;
  Matrix wq, wk, wv;
};

BenchInputs make_inputs(std::size_t d, std::size_t heads, std::size_t p,
                        std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  BenchInputs in;
  in.z = Matrix(d, n);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < n; ++j) in.z(i, j) = rng.normal();
  in.bank.bases.reserve(heads);
  for (std::size_t k = 0; k < heads; ++k)
    in.bank.bases.push_back(random_orthonormal(d, p, rng));
  in.wq = random_orthonormal(d, p, rng);
  in.wk = random_orthonormal(d, p, rng);
  in.wv = random_orthonormal(d, p, rng);
  return in;
}

template <typename T>
struct KernelInputs {
  detail::buf<T> z;
  std::vector<detail::buf<T>> bank;
  std::vector<const T*> bank_ptrs;
  detail::buf<T> wq, wk, wv;
  detail::AttnParams<T> attn;
};

template <typename T>
KernelInputs<T> to_kernel(const BenchInputs& in, const TssaParams& params) {
  KernelInputs<T> k;
  k.z.resize(in.z.size());
  for (std::size_t t = 0; t < in.z.size(); ++t) k.z[t] = static_cast<T>(in.z.data()[t]);
  k.bank.reserve(in.bank.heads());
  for (const Matrix& u : in.bank.bases) {
    detail::buf<T> b(u.size());
    for (std::size_t t = 0; t < u.size(); ++t) b[t] = static_cast<T>(u.data()[t]);
    k.bank.push_back(std::move(b));
  }
  for (const auto& b : k.bank) k.bank_ptrs.push_back(b.data());
  auto convert = [](const Matrix& m, detail::buf<T>& dst) {
    dst.resize(m.size());
    for (std::size_t t = 0; t < m.size(); ++t) dst[t] = static_cast<T>(m.data()[t]);
  };
  convert(in.wq, k.wq);
  convert(in.wk, k.wk);
  convert(in.wv, k.wv);
  k.attn.d = in.z.rows();
  k.attn.n = in.z.cols();
  k.attn.heads = in.bank.heads();
  k.attn.p = in.bank.head_dim();
  k.attn.tau = static_cast<T>(params.tau);
  k.attn.eta = static_cast<T>(params.eta);
  k.attn.alpha = static_cast<T>(params.f.alpha);
  k.attn.normalize = params.normalize_membership;
  k.attn.norm_eps = static_cast<T>(params.norm_eps);
  return k;
}

template <typename T>
void run_op_kernel(BenchOp op, const KernelInputs<T>& k) {
  switch (op) {
    case BenchOp::tssa: {
      detail::buf<T> out(k.attn.d * k.attn.n);
      detail::tssa_forward(k.attn, k.z.data(), k.bank_ptrs.data(), out.data());
      break;
    }
    case BenchOp::causal_tssa: {
      detail::buf<T> out(k.attn.d * k.attn.n);
      detail::causal_forward(k.attn, k.z.data(), k.bank_ptrs.data(),
                             static_cast<const T*>(nullptr), out.data());
      break;
    }
    case BenchOp::sdpa: {
      detail::buf<T> out(k.attn.p * k.attn.n);
      detail::sdpa_forward(k.z.data(), k.wq.data(), k.wk.data(), k.wv.data(),
                           k.attn.d, k.attn.p, k.attn.n, out.data());
      break;
    }
  }
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

// Converts once, then: 1 warm-up, `reps` timed runs, and a separate untimed
// run that records peak bytes requested by the operator itself (conversion
// buffers live outside the measured window).
template <typename T>
BenchCell run_cell(BenchOp op, const BenchInputs& inputs, const TssaParams& params,
                   std::size_t reps) {
  const KernelInputs<T> k = to_kernel<T>(inputs, params);
  BenchCell cell;
  cell.n = inputs.z.cols();

  run_op_kernel(op, k);  // warm-up

  std::vector<double> times;
  times.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    run_op_kernel(op, k);
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  cell.median_s = quantile_sorted(times, 0.5);
  cell.iqr_s = quantile_sorted(times, 0.75) - quantile_sorted(times, 0.25);

  alloc_stats::reset();
  run_op_kernel(op, k);
  cell.peak_aux_bytes = alloc_stats::peak_bytes();
  return cell;
}

}  // namespace

BenchReport bench_scaling(BenchOp op, const std::vector<std::size_t>& n_grid,
                          std::size_t d, std::size_t heads, std::size_t p,
                          std::size_t reps, std::uint64_t seed,
                          BenchPrecision precision, int thread_count) {
  if (n_grid.size() < 3)
    throw SpecError("bench_scaling: grid needs at least 3 points, got " +
                    std::to_string(n_grid.size()));
  if (reps < 5) throw SpecError("bench_scaling: reps must be >= 5");
  if (d == 0 || heads == 0 || p == 0 || p > d)
    throw SpecError("bench_scaling: need d >= 1, heads >= 1, 1 <= p <= d");
  for (std::size_t n : n_grid)
    if (n == 0) throw SpecError("bench_scaling: grid entries must be >= 1");

  ThreadCountGuard guard(thread_count);
  const TssaParams params = TssaParams::for_dim(d);

  BenchReport report;
  report.op = bench_op_name(op);
  report.d = d;
  report.heads = heads;
  report.p = p;
  report.reps = reps;
  report.threads = thread_count;
  report.precision = precision == BenchPrecision::f64 ? "double" : "single";
  report.seed = seed;
  report.cells.reserve(n_grid.size());

  for (std::size_t n : n_grid) {
    const BenchInputs inputs = make_inputs(d, heads, p, n, seed);
    report.cells.push_back(precision == BenchPrecision::f64
                               ? run_cell<double>(op, inputs, params, reps)
                               : run_cell<float>(op, inputs, params, reps));
  }

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double m = static_cast<double>(report.cells.size());
  for (const BenchCell& cell : report.cells) {
    const double x = std::log(static_cast<double>(cell.n));
    const double y = std::log(cell.median_s);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  report.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return report;
}

}  // namespace tost
