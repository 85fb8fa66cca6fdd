#include "tost/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "tost/error.hpp"
#include "tost/linalg.hpp"
#include "tost/rng.hpp"

namespace tost {

namespace {

constexpr double kVarEps = 1e-6;
constexpr std::uint32_t kFormatVersion = 1;
constexpr char kMagic[4] = {'T', 'O', 'S', 'T'};

void require_vec(const std::vector<double>& v, std::size_t len, const char* name) {
  if (v.size() != len)
    throw DimensionError(std::string(name) + " has length " + std::to_string(v.size()) +
                         ", expected " + std::to_string(len));
  for (double x : v)
    if (!std::isfinite(x))
      throw ValidationError(std::string(name) + " has non-finite entries");
}

void require_block(const BlockParams& b, std::size_t d) {
  if (b.bank.bases.empty()) throw DimensionError("block has an empty bank");
  if (b.bank.feature_dim() != d) throw DimensionError("block bank dimension mismatch");
  const std::size_t h = b.mlp_w1.cols();
  if (h == 0 || b.mlp_w1.rows() != d)
    throw DimensionError("mlp_w1 must be d x h with h >= 1");
  if (b.mlp_w2.rows() != h || b.mlp_w2.cols() != d)
    throw DimensionError("mlp_w2 must be h x d");
  if (!all_finite(b.mlp_w1) || !all_finite(b.mlp_w2))
    throw ValidationError("MLP weights have non-finite entries");
  require_vec(b.mlp_b1, h, "mlp_b1");
  require_vec(b.mlp_b2, d, "mlp_b2");
  require_vec(b.norm1_scale, d, "norm1_scale");
  require_vec(b.norm1_shift, d, "norm1_shift");
  require_vec(b.norm2_scale, d, "norm2_scale");
  require_vec(b.norm2_shift, d, "norm2_shift");
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * phi;
}

Matrix layer_norm(const Matrix& z, const std::vector<double>& scale,
                  const std::vector<double>& shift) {
  if (z.rows() == 0 || z.cols() == 0)
    throw DimensionError("layer_norm: token matrix must be nonempty");
  require_vec(scale, z.rows(), "scale");
  require_vec(shift, z.rows(), "shift");
  const std::size_t d = z.rows();
  Matrix out(d, z.cols());
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += z(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double c = z(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    // clamp rather than add so an exactly standardized column passes through
    const double inv = 1.0 / std::sqrt(std::max(var, kVarEps));
    for (std::size_t i = 0; i < d; ++i)
      out(i, j) = scale[i] * ((z(i, j) - mean) * inv) + shift[i];
  }
  return out;
}

Matrix mlp_forward(const Matrix& z, const Matrix& w1, const std::vector<double>& b1,
                   const Matrix& w2, const std::vector<double>& b2) {
  if (w1.rows() != z.rows())
    throw DimensionError("mlp_forward: w1 rows must match feature dim");
  const std::size_t h = w1.cols();
  if (w2.rows() != h || w2.cols() != z.rows())
    throw DimensionError("mlp_forward: w2 must be h x d");
  require_vec(b1, h, "b1");
  require_vec(b2, z.rows(), "b2");

  Matrix hidden = multiply_at_b(w1, z);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) hidden(i, j) = gelu(hidden(i, j) + b1[i]);
  Matrix out = multiply_at_b(w2, hidden);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b2[i];
  return out;
}

Matrix block_forward(const Matrix& z, const BlockParams& params) {
  require_block(params, z.rows());
  const Matrix normed = layer_norm(z, params.norm1_scale, params.norm1_shift);
  Matrix z1 = params.causal
                  ? causal_tssa_attention(normed, params.bank, params.attn)
                  : tssa_attention(normed, params.bank, params.attn.base);
  z1 += z;
  Matrix out = mlp_forward(layer_norm(z1, params.norm2_scale, params.norm2_shift),
                           params.mlp_w1, params.mlp_b1, params.mlp_w2, params.mlp_b2);
  out += z1;
  return out;
}

Matrix model_forward(const Matrix& z, const ModelParams& params) {
  return model_forward(z, params, false).z;
}

ForwardResult model_forward(const Matrix& z, const ModelParams& params, bool record) {
  ForwardResult result{z, {}};
  if (record) result.trace.reserve(params.depth());
  for (const BlockParams& layer : params.layers) {
    if (record) {
      const Matrix normed =
          layer_norm(result.z, layer.norm1_scale, layer.norm1_shift);
      const Membership pi = estimate_membership(normed, layer.bank, layer.attn.base);
      LayerTrace t;
      t.compression = variational_compression(normed, pi, layer.bank, layer.attn.base.f);
      t.expansion = expansion_rate(normed, layer.attn.base.f.alpha);
      result.trace.push_back(t);
    }
    result.z = block_forward(result.z, layer);
  }
  return result;
}

ModelParams init_model(std::size_t d, std::size_t p, std::size_t heads,
                       std::size_t hidden, std::size_t depth, std::uint64_t seed,
                       InitMode mode) {
  if (d == 0 || p == 0 || p > d || heads == 0 || hidden == 0)
    throw DimensionError("init_model: need d >= 1, 1 <= p <= d, heads >= 1, h >= 1");
  ModelParams model;
  model.d = d;
  model.p = p;
  model.heads = heads;
  model.hidden = hidden;
  model.layers.reserve(depth);
  Rng rng(seed);
  for (std::size_t l = 0; l < depth; ++l) {
    BlockParams block;
    block.bank.bases.reserve(heads);
    for (std::size_t k = 0; k < heads; ++k)
      block.bank.bases.push_back(random_orthonormal(d, p, rng));
    block.attn.base = TssaParams::for_dim(d);
    block.mlp_w1 = Matrix(d, hidden);
    block.mlp_w2 = Matrix(hidden, d);
    if (mode == InitMode::random) {
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < hidden; ++j) block.mlp_w1(i, j) = 0.02 * rng.normal();
      for (std::size_t i = 0; i < hidden; ++i)
        for (std::size_t j = 0; j < d; ++j) block.mlp_w2(i, j) = 0.02 * rng.normal();
    }
    block.mlp_b1.assign(hidden, 0.0);
    block.mlp_b2.assign(d, 0.0);
    block.norm1_scale.assign(d, 1.0);
    block.norm1_shift.assign(d, 0.0);
    block.norm2_scale.assign(d, 1.0);
    block.norm2_shift.assign(d, 0.0);
    model.layers.push_back(std::move(block));
  }
  return model;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_doubles(std::ostream& os, const double* v, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) put_f64(os, v[i]);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw ValidationError("model file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw ValidationError("model file truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void get_doubles(std::istream& is, double* v, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) v[i] = get_f64(is);
}

constexpr std::uint32_t kFlagNormalize = 1u << 0;
constexpr std::uint32_t kFlagCausal = 1u << 1;
constexpr std::uint32_t kFlagHasW = 1u << 2;
constexpr std::uint32_t kFlagHasBias = 1u << 3;

}  // namespace

void save_model(const ModelParams& params, const std::string& path) {
  for (const BlockParams& b : params.layers) require_block(b, params.d);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("save_model: cannot open " + path);
  os.write(kMagic, 4);
  put_u32(os, kFormatVersion);
  put_u32(os, static_cast<std::uint32_t>(params.d));
  put_u32(os, static_cast<std::uint32_t>(params.p));
  put_u32(os, static_cast<std::uint32_t>(params.heads));
  put_u32(os, static_cast<std::uint32_t>(params.hidden));
  put_u32(os, static_cast<std::uint32_t>(params.depth()));
  for (const BlockParams& b : params.layers) {
    std::uint32_t flags = 0;
    if (b.attn.base.normalize_membership) flags |= kFlagNormalize;
    if (b.causal) flags |= kFlagCausal;
    if (b.attn.base.w) flags |= kFlagHasW;
    if (b.attn.bias) flags |= kFlagHasBias;
    put_u32(os, flags);
    put_f64(os, b.attn.base.tau);
    put_f64(os, b.attn.base.eta);
    put_f64(os, b.attn.base.f.alpha);
    put_f64(os, b.attn.base.norm_eps);
    for (const Matrix& u : b.bank.bases) put_doubles(os, u.data(), u.size());
    if (b.attn.base.w) put_doubles(os, b.attn.base.w->data(), b.attn.base.w->size());
    if (b.attn.bias) {
      put_u32(os, static_cast<std::uint32_t>(b.attn.bias->rows()));
      put_doubles(os, b.attn.bias->data(), b.attn.bias->size());
    }
    put_doubles(os, b.mlp_w1.data(), b.mlp_w1.size());
    put_doubles(os, b.mlp_w2.data(), b.mlp_w2.size());
    put_doubles(os, b.mlp_b1.data(), b.mlp_b1.size());
    put_doubles(os, b.mlp_b2.data(), b.mlp_b2.size());
    put_doubles(os, b.norm1_scale.data(), b.norm1_scale.size());
    put_doubles(os, b.norm1_shift.data(), b.norm1_shift.size());
    put_doubles(os, b.norm2_scale.data(), b.norm2_scale.size());
    put_doubles(os, b.norm2_shift.data(), b.norm2_shift.size());
  }
  if (!os) throw ValidationError("save_model: write failed for " + path);
}

ModelParams load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("load_model: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("load_model: bad magic");
  const std::uint32_t version = get_u32(is);
  if (version != kFormatVersion)
    throw ValidationError("load_model: unsupported version " + std::to_string(version));
  ModelParams params;
  params.d = get_u32(is);
  params.p = get_u32(is);
  params.heads = get_u32(is);
  params.hidden = get_u32(is);
  const std::uint32_t depth = get_u32(is);
  if (params.d == 0 || params.p == 0 || params.p > params.d || params.heads == 0 ||
      params.hidden == 0)
    throw ValidationError("load_model: invalid header dimensions");
  params.layers.reserve(depth);
  for (std::uint32_t l = 0; l < depth; ++l) {
    BlockParams b;
    const std::uint32_t flags = get_u32(is);
    b.attn.base.normalize_membership = (flags & kFlagNormalize) != 0;
    b.causal = (flags & kFlagCausal) != 0;
    b.attn.base.tau = get_f64(is);
    b.attn.base.eta = get_f64(is);
    b.attn.base.f.alpha = get_f64(is);
    b.attn.base.norm_eps = get_f64(is);
    for (std::size_t k = 0; k < params.heads; ++k) {
      Matrix u(params.d, params.p);
      get_doubles(is, u.data(), u.size());
      b.bank.bases.push_back(std::move(u));
    }
    if (flags & kFlagHasW) {
      Matrix w(params.d, params.p * params.heads);
      get_doubles(is, w.data(), w.size());
      b.attn.base.w = std::move(w);
    }
    if (flags & kFlagHasBias) {
      const std::uint32_t rows = get_u32(is);
      Matrix bias(rows, params.heads);
      get_doubles(is, bias.data(), bias.size());
      b.attn.bias = std::move(bias);
    }
    b.mlp_w1 = Matrix(params.d, params.hidden);
    get_doubles(is, b.mlp_w1.data(), b.mlp_w1.size());
    b.mlp_w2 = Matrix(params.hidden, params.d);
    get_doubles(is, b.mlp_w2.data(), b.mlp_w2.size());
    b.mlp_b1.resize(params.hidden);
    get_doubles(is, b.mlp_b1.data(), b.mlp_b1.size());
    b.mlp_b2.resize(params.d);
    get_doubles(is, b.mlp_b2.data(), b.mlp_b2.size());
    b.norm1_scale.resize(params.d);
    get_doubles(is, b.norm1_scale.data(), b.norm1_scale.size());
    b.norm1_shift.resize(params.d);
    get_doubles(is, b.norm1_shift.data(), b.norm1_shift.size());
    b.norm2_scale.resize(params.d);
    get_doubles(is, b.norm2_scale.data(), b.norm2_scale.size());
    b.norm2_shift.resize(params.d);
    get_doubles(is, b.norm2_shift.data(), b.norm2_shift.size());
    params.layers.push_back(std::move(b));
  }
  is.peek();
  if (!is.eof()) throw ValidationError("load_model: trailing bytes after last layer");
  return params;
}

}  // namespace tost
