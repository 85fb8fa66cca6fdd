#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tost/causal.hpp"
#include "tost/coding_rate.hpp"
#include "tost/matrix.hpp"
#include "tost/tssa.hpp"

namespace tost {

// One pre-norm transformer block: attention (plain or causal) and a two-layer
// GELU MLP, each behind a residual connection.
struct BlockParams {
  ProjectionBank bank;
  CausalParams attn;  // attn.base drives the non-causal path; bias is causal-only
  bool causal = false;
  Matrix mlp_w1;                // d x h
  Matrix mlp_w2;                // h x d
  std::vector<double> mlp_b1;   // h
  std::vector<double> mlp_b2;   // d
  std::vector<double> norm1_scale, norm1_shift;  // d
  std::vector<double> norm2_scale, norm2_shift;  // d
};

struct ModelParams {
  std::size_t d = 0, p = 0, heads = 0, hidden = 0;
  std::vector<BlockParams> layers;

  std::size_t depth() const { return layers.size(); }
};

// Per-layer measurements taken at the attention input (after the block's
// first normalization): the variational compression under that layer's bank
// and membership, and the expansion rate of the same features.
struct LayerTrace {
  double compression = 0.0;
  double expansion = 0.0;
};

struct ForwardResult {
  Matrix z;
  std::vector<LayerTrace> trace;  // length = depth when recording, else empty
};

double gelu(double x);
double gelu_grad(double x);

// Column-wise standardization over the d features (mean 0, population
// variance 1, variance guard 1e-6), then per-feature affine scale/shift.
Matrix layer_norm(const Matrix& z, const std::vector<double>& scale,
                  const std::vector<double>& shift);

// w2^T gelu(w1^T Z + b1) + b2, applied column-wise.
Matrix mlp_forward(const Matrix& z, const Matrix& w1, const std::vector<double>& b1,
                   const Matrix& w2, const std::vector<double>& b2);

Matrix block_forward(const Matrix& z, const BlockParams& params);

Matrix model_forward(const Matrix& z, const ModelParams& params);
ForwardResult model_forward(const Matrix& z, const ModelParams& params, bool record);

enum class InitMode {
  random,        // MLP weights Gaussian (std 0.02)
  oracle_ready,  // MLP zeroed: blocks reduce to attention residual steps
};

// Deterministic per seed. Banks are random orthonormal per head per layer;
// norms start at scale 1, shift 0; attention params take the alpha = d
// convention from TssaParams::for_dim.
ModelParams init_model(std::size_t d, std::size_t p, std::size_t heads,
                       std::size_t hidden, std::size_t depth, std::uint64_t seed,
                       InitMode mode);

// Binary container, little-endian, documented in docs/model_format.md.
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace tost
