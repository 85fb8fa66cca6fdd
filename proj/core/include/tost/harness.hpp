#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tost/coding_rate.hpp"
#include "tost/matrix.hpp"

namespace tost {

// Tokens drawn from K mutually orthogonal p-dimensional subspaces of R^d,
// plus optional isotropic noise.
struct SynthSpec {
  std::size_t d = 16;
  std::size_t p = 4;
  std::size_t heads = 4;
  std::size_t tokens_per_group = 12;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

struct SynthData {
  Matrix z;                         // d x (heads * tokens_per_group), group-major
  std::vector<std::size_t> labels;  // exactly tokens_per_group tokens per group
  ProjectionBank bases;             // the true subspace bases
};

SynthData synth_subspaces(const SynthSpec& spec);

// Standard quadratic attention baseline. Returns the p x n output
// Wv^T Z softmax_rows((Wq^T Z)^T (Wk^T Z) / sqrt(p))^T; materializes n x n.
Matrix baseline_sdpa(const Matrix& z, const Matrix& wq, const Matrix& wk,
                     const Matrix& wv);

enum class LayerwiseMode { oracle, fixed };

// `depth` attention-only update steps on the given tokens. The trace has
// depth+1 entries: the compression before each step and after the last one.
// Oracle mode re-derives the bank from the current features before every
// measurement; fixed mode keeps the seeded random bank throughout.
std::vector<double> layerwise_trace(const Matrix& z0, std::size_t heads,
                                    std::size_t p, std::size_t depth, double tau,
                                    LayerwiseMode mode, std::uint64_t bank_seed);

// Same experiment on synthetic subspace data built from spec.
std::vector<double> layerwise_experiment(const SynthSpec& spec, std::size_t depth,
                                         double tau, LayerwiseMode mode);

enum class BenchOp { tssa, causal_tssa, sdpa };
enum class BenchPrecision { f64, f32 };

const char* bench_op_name(BenchOp op);

struct BenchCell {
  std::size_t n = 0;
  double median_s = 0.0;
  double iqr_s = 0.0;
  std::size_t peak_aux_bytes = 0;
};

struct BenchReport {
  std::string op;
  std::size_t d = 0, heads = 0, p = 0;
  std::size_t reps = 0;
  int threads = 1;
  std::string precision;  // "double" or "single"
  std::uint64_t seed = 0;
  double slope = 0.0;  // least-squares slope of log median time vs log n
  std::vector<BenchCell> cells;
};

// Times one operator over the n grid on seeded random inputs: 1 warm-up, then
// `reps` timed runs per cell (median and interquartile range), plus a separate
// untimed run that records peak bytes requested through the allocation
// accounting layer. Inputs for a given (seed, d, heads, p, n) are identical
// across operators.
BenchReport bench_scaling(BenchOp op, const std::vector<std::size_t>& n_grid,
                          std::size_t d, std::size_t heads, std::size_t p,
                          std::size_t reps, std::uint64_t seed,
                          BenchPrecision precision = BenchPrecision::f64,
                          int thread_count = 1);

}  // namespace tost
