// Command-line front end: every verification suite and benchmark as a
// reproducible subcommand. Exit codes: 0 pass, 1 assertion failure,
// 2 usage/config error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tost/causal.hpp"
#include "tost/coding_rate.hpp"
#include "tost/error.hpp"
#include "tost/harness.hpp"
#include "tost/linalg.hpp"
#include "tost/matrix.hpp"
#include "tost/report_io.hpp"
#include "tost/rng.hpp"
#include "tost/threads.hpp"
#include "tost/tssa.hpp"

namespace {

using nlohmann::json;
using namespace tost;

struct RunConfig {
  std::size_t d = 16, p = 4, K = 4, n = 48, L = 8, h = 64;
  double tau = 1.0, eta = 1.0, epsilon = 1.0, noise_std = 0.0;
  std::uint64_t seed = 0;
  std::size_t trials = 0;  // 0 picks the per-command default unless given
  std::string output;      // empty -> <command>_report.<format>
  std::string format = "csv";
  std::string precision = "double";
  int threads = 1;
  std::string mode = "oracle";
  std::string op = "all";
  std::vector<std::size_t> n_grid;
  std::size_t reps = 5;
  bool assert_windows = false;
  bool inject_sign_flip = false;
  std::string config_path;

  bool d_given = false, p_given = false, K_given = false, n_given = false;
  bool tau_given = false, trials_given = false;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

Membership random_membership(std::size_t n, std::size_t k, Rng& rng) {
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

std::string report_path(const RunConfig& cfg, const std::string& stem) {
  if (!cfg.output.empty()) return cfg.output;
  return stem + (cfg.format == "json" ? ".json" : ".csv");
}

void emit(const RunConfig& cfg, const std::string& stem, const std::string& csv,
          const json& j) {
  const std::string path = report_path(cfg, stem);
  write_text_file(path, cfg.format == "json" ? j.dump(2) + "\n" : csv);
  std::printf("report: %s\n", path.c_str());
}

// ---------------------------------------------------------------- bound-check

int cmd_bound_check(const RunConfig& cfg) {
  const std::size_t trials = cfg.trials_given ? cfg.trials : 1000;
  if (trials == 0) throw SpecError("bound-check: trials must be >= 1");
  std::printf("bound-check seed=%llu trials=%zu\n",
              static_cast<unsigned long long>(cfg.seed), trials);

  Rng rng(cfg.seed);
  double min_gap = std::numeric_limits<double>::infinity();
  double max_oracle = 0.0;
  std::size_t violations = 0;

  auto check_nonneg = [&](double gap) {
    min_gap = std::min(min_gap, gap);
    if (gap < -1e-8) ++violations;
  };
  auto check_tight = [&](double gap) {
    min_gap = std::min(min_gap, gap);
    max_oracle = std::max(max_oracle, std::abs(gap));
    if (std::abs(gap) > 1e-8) ++violations;
  };

  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t d = 2 + rng.next_u64() % 11;
    const std::size_t n = 1 + rng.next_u64() % 20;
    const std::size_t k = 1 + rng.next_u64() % 4;
    const double eps = 0.5 + 1.5 * rng.uniform();
    const SpectralFn f{static_cast<double>(d) / (eps * eps)};

    const Matrix z = gaussian_matrix(d, n, rng);
    const Membership pi = random_membership(n, k, rng);

    ProjectionBank full;
    for (std::size_t c = 0; c < k; ++c)
      full.bases.push_back(random_orthonormal(d, d, rng));
    check_nonneg(variational_bound_gap(z, pi, full, f));

    check_tight(variational_bound_gap(z, pi, oracle_bases(z, pi, d), f));

    // rank-limited data whose span every head's basis covers
    const std::size_t p = 1 + rng.next_u64() % d;
    const Matrix b = random_orthonormal(d, p, rng);
    const Matrix zl = multiply(b, gaussian_matrix(p, n, rng));
    ProjectionBank low;
    for (std::size_t c = 0; c < k; ++c)
      low.bases.push_back(multiply(b, random_orthonormal(p, p, rng)));
    check_nonneg(variational_bound_gap(zl, pi, low, f));

    check_tight(variational_bound_gap(zl, pi, oracle_bases(zl, pi, p), f));
  }

  const bool pass = violations == 0;
  std::printf("min_gap=%s max_oracle_abs_gap=%s violations=%zu %s\n",
              fmt(min_gap).c_str(), fmt(max_oracle).c_str(), violations,
              pass ? "PASS" : "FAIL");

  std::string csv = "schema_version,seed,trials,min_gap,max_oracle_abs_gap,violations\n";
  csv += std::to_string(kReportSchemaVersion) + ',' + std::to_string(cfg.seed) + ',' +
         std::to_string(trials) + ',' + fmt(min_gap) + ',' + fmt(max_oracle) + ',' +
         std::to_string(violations) + '\n';
  json j = {{"schema_version", kReportSchemaVersion}, {"kind", "bound_check"},
            {"seed", cfg.seed},     {"trials", trials},
            {"min_gap", min_gap},   {"max_oracle_abs_gap", max_oracle},
            {"violations", violations}, {"pass", pass}};
  emit(cfg, "bound_check_report", csv, j);
  return pass ? 0 : 1;
}

// ----------------------------------------------------------------- grad-check

Matrix grad_fd(const Matrix& z, const Membership& pi, const ProjectionBank& bank,
               const SpectralFn& f, double h) {
  Matrix g(z.rows(), z.cols());
  Matrix zp = z;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) {
      zp(i, j) = z(i, j) + h;
      const double up = variational_compression(zp, pi, bank, f);
      zp(i, j) = z(i, j) - h;
      const double down = variational_compression(zp, pi, bank, f);
      zp(i, j) = z(i, j);
      g(i, j) = (up - down) / (2.0 * h);
    }
  return g;
}

int cmd_grad_check(const RunConfig& cfg) {
  const std::size_t trials = cfg.trials_given ? cfg.trials : 100;
  if (trials == 0) throw SpecError("grad-check: trials must be >= 1");
  std::printf("grad-check seed=%llu trials=%zu%s\n",
              static_cast<unsigned long long>(cfg.seed), trials,
              cfg.inject_sign_flip ? " (sign-flip fault injected)" : "");

  Rng rng(cfg.seed);
  constexpr double kTol = 1e-5;
  double max_rel = 0.0;
  std::string csv = "schema_version,seed,trial,d,n,K,p,rel_error\n";
  json rows = json::array();

  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t d = 1 + rng.next_u64() % 8;
    const std::size_t n = 1 + rng.next_u64() % 10;
    const std::size_t k = 1 + rng.next_u64() % 3;
    const std::size_t p = 1 + rng.next_u64() % d;
    const double eps = 0.5 + 1.5 * rng.uniform();
    const SpectralFn f{static_cast<double>(d) / (eps * eps)};

    const Matrix z = gaussian_matrix(d, n, rng);
    const Membership pi = random_membership(n, k, rng);
    ProjectionBank bank;
    for (std::size_t c = 0; c < k; ++c)
      bank.bases.push_back(random_orthonormal(d, p, rng));

    Matrix ga = grad_variational(z, pi, bank, f);
    if (cfg.inject_sign_flip) ga *= -1.0;
    const Matrix gn = grad_fd(z, pi, bank, f, 1e-5);
    const double rel = max_abs_diff(ga, gn) / std::max(max_abs(gn), 1e-12);
    max_rel = std::max(max_rel, rel);

    csv += std::to_string(kReportSchemaVersion) + ',' + std::to_string(cfg.seed) +
           ',' + std::to_string(t) + ',' + std::to_string(d) + ',' +
           std::to_string(n) + ',' + std::to_string(k) + ',' + std::to_string(p) +
           ',' + fmt(rel) + '\n';
    rows.push_back({{"trial", t}, {"d", d}, {"n", n}, {"K", k}, {"p", p},
                    {"rel_error", rel}});
  }

  const bool pass = max_rel <= kTol;
  std::printf("max_rel_error=%s tolerance=%s %s\n", fmt(max_rel).c_str(),
              fmt(kTol).c_str(), pass ? "PASS" : "FAIL");
  json j = {{"schema_version", kReportSchemaVersion}, {"kind", "grad_check"},
            {"seed", cfg.seed},      {"trials", trials},
            {"max_rel_error", max_rel}, {"tolerance", kTol},
            {"pass", pass},          {"trial_errors", rows}};
  emit(cfg, "grad_check_report", csv, j);
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------- equivalence

Matrix per_token_reference(const Matrix& z, const ProjectionBank& bank,
                           const TssaParams& prm) {
  const Membership pi = estimate_membership(z, bank, prm);
  const std::size_t d = z.rows(), n = z.cols();
  Matrix out(d, n);
  for (std::size_t k = 0; k < bank.heads(); ++k) {
    std::vector<double> w(n);
    double mass = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = pi.pi(j, k);
      mass += w[j];
    }
    if (mass < 1e-12) continue;
    const std::vector<double> gate = diag_gate(z, w, bank.bases[k], prm.f);
    const Matrix proj = multiply_at_b(bank.bases[k], z);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < bank.head_dim(); ++i) {
        const double c = gate[i] * w[j] * proj(i, j);
        for (std::size_t r = 0; r < d; ++r) out(r, j) += bank.bases[k](r, i) * c;
      }
  }
  out *= -prm.tau / static_cast<double>(n);
  return out;
}

Matrix swap_cols(const Matrix& m, std::size_t a, std::size_t b) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out(i, a) = m(i, b);
    out(i, b) = m(i, a);
  }
  return out;
}

Matrix swap_rows(const Matrix& m, std::size_t a, std::size_t b) {
  Matrix out = m;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    out(a, j) = m(b, j);
    out(b, j) = m(a, j);
  }
  return out;
}

int cmd_equivalence(const RunConfig& cfg) {
  const std::size_t sweeps = cfg.trials_given ? cfg.trials : 10;
  if (sweeps == 0) throw SpecError("equivalence: trials must be >= 1");
  std::printf("equivalence seed=%llu sweeps=%zu\n",
              static_cast<unsigned long long>(cfg.seed), sweeps);

  std::string csv = "schema_version,seed,sweep,check,max_error,pass\n";
  json rows = json::array();
  bool all_pass = true;

  auto record = [&](std::size_t sweep, const std::string& check, double err,
                    double tol) {
    const bool ok = err <= tol;
    all_pass = all_pass && ok;
    csv += std::to_string(kReportSchemaVersion) + ',' + std::to_string(cfg.seed) +
           ',' + std::to_string(sweep) + ',' + check + ',' + fmt(err) + ',' +
           (ok ? "1" : "0") + '\n';
    rows.push_back({{"sweep", sweep}, {"check", check}, {"max_error", err},
                    {"tolerance", tol}, {"pass", ok}});
    if (!ok)
      std::printf("  sweep %zu %s max_error=%s exceeds %s\n", sweep, check.c_str(),
                  fmt(err).c_str(), fmt(tol).c_str());
  };

  for (std::size_t s = 0; s < sweeps; ++s) {
    Rng rng(cfg.seed + s);
    const std::size_t d = 2 + rng.next_u64() % 11;
    const std::size_t n = s == 0 ? 1 : 2 + rng.next_u64() % 23;
    const std::size_t k = 1 + rng.next_u64() % 4;
    const std::size_t p = 1 + rng.next_u64() % std::min<std::size_t>(d, 4);

    TssaParams prm = TssaParams::for_dim(d, 0.5 + 1.5 * rng.uniform());
    prm.tau = 0.25 + 1.75 * rng.uniform();
    prm.eta = 0.5 + 1.5 * rng.uniform();

    const Matrix z = gaussian_matrix(d, n, rng);
    ProjectionBank bank;
    for (std::size_t c = 0; c < k; ++c)
      bank.bases.push_back(random_orthonormal(d, p, rng));

    // attention output equals -tau times the compression gradient at its own
    // estimated membership
    const Matrix attn = tssa_attention(z, bank, prm);
    const Membership pihat = estimate_membership(z, bank, prm);
    const Matrix grad = grad_variational(z, pihat, bank, prm.f);
    double err = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < n; ++j)
        err = std::max(err, std::abs(attn(i, j) + prm.tau * grad(i, j)));
    record(s, "gradient_identity", err, 1e-10);

    record(s, "per_token_form", max_abs_diff(attn, per_token_reference(z, bank, prm)),
           1e-10);

    // causal column j against the batch operator on the length-j prefix;
    // prefix statistics only line up with membership normalization off
    TssaParams nf = prm;
    nf.normalize_membership = false;
    CausalParams cp;
    cp.base = nf;
    const Matrix causal = causal_tssa_attention(z, bank, cp);
    err = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      Matrix prefix(d, j + 1);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t c = 0; c <= j; ++c) prefix(i, c) = z(i, c);
      const Matrix batch = tssa_attention(prefix, bank, nf);
      for (std::size_t i = 0; i < d; ++i)
        err = std::max(err, std::abs(batch(i, j) - causal(i, j)));
    }
    record(s, "prefix_oracle", err, 1e-10);

    if (n >= 2) {
      const std::size_t a = rng.next_u64() % n;
      std::size_t b = rng.next_u64() % n;
      if (b == a) b = (a + 1) % n;
      const Matrix zs = swap_cols(z, a, b);
      record(s, "permutation_equivariance_attention",
             max_abs_diff(swap_cols(attn, a, b), tssa_attention(zs, bank, prm)),
             1e-12);
      record(s, "permutation_equivariance_membership",
             max_abs_diff(swap_rows(pihat.pi, a, b),
                          estimate_membership(zs, bank, prm).pi),
             1e-12);
    }

    CausalParams cs;
    cs.base = prm;
    const Matrix causal_batch = causal_tssa_attention(z, bank, cs);
    CausalStream stream(bank, cs);
    err = 0.0;
    std::vector<double> zcol(d);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < d; ++i) zcol[i] = z(i, j);
      const std::vector<double> out = stream.push(zcol);
      for (std::size_t i = 0; i < d; ++i)
        err = std::max(err, std::abs(out[i] - causal_batch(i, j)));
    }
    record(s, "streaming_vs_batch", err, 0.0);
  }

  std::printf("%s\n", all_pass ? "PASS" : "FAIL");
  json j = {{"schema_version", kReportSchemaVersion}, {"kind", "equivalence"},
            {"seed", cfg.seed},  {"sweeps", sweeps},
            {"pass", all_pass},  {"checks", rows}};
  emit(cfg, "equivalence_report", csv, j);
  return all_pass ? 0 : 1;
}

// ------------------------------------------------------------------ layerwise

int cmd_layerwise(const RunConfig& cfg) {
  const double alpha = static_cast<double>(cfg.d) / (cfg.epsilon * cfg.epsilon);
  const double tau = cfg.tau_given ? cfg.tau : 1e-2 / alpha;
  if (cfg.mode != "oracle" && cfg.mode != "fixed")
    throw SpecError("layerwise: mode must be oracle or fixed");
  if (cfg.n % cfg.K != 0)
    throw SpecError("layerwise: n must be a multiple of K (tokens are grouped)");

  SynthSpec spec;
  spec.d = cfg.d;
  spec.p = cfg.p;
  spec.heads = cfg.K;
  spec.tokens_per_group = cfg.n / cfg.K;
  spec.noise_std = cfg.noise_std;
  spec.seed = cfg.seed;
  const LayerwiseMode mode =
      cfg.mode == "oracle" ? LayerwiseMode::oracle : LayerwiseMode::fixed;

  std::printf("layerwise seed=%llu mode=%s d=%zu K=%zu p=%zu n=%zu L=%zu tau=%s\n",
              static_cast<unsigned long long>(cfg.seed), cfg.mode.c_str(), cfg.d,
              cfg.K, cfg.p, cfg.n, cfg.L, fmt(tau).c_str());

  TraceReport report;
  report.seed = cfg.seed;
  report.mode = cfg.mode;
  report.tau = tau;
  report.trace = layerwise_experiment(spec, cfg.L, tau, mode);

  bool monotone = true;
  for (std::size_t i = 0; i < report.trace.size(); ++i) {
    std::printf("layer %zu compression=%s\n", i, fmt(report.trace[i]).c_str());
    if (i > 0 && report.trace[i] > report.trace[i - 1] + 1e-9) monotone = false;
  }
  emit(cfg, "layerwise_trace", trace_csv(report),
       json::parse(trace_json(report)));

  if (mode == LayerwiseMode::oracle && !monotone) {
    std::printf("FAIL: trace is not non-increasing\n");
    return 1;
  }
  std::printf("PASS\n");
  return 0;
}

// ---------------------------------------------------------------------- bench

int cmd_bench(const RunConfig& cfg) {
  const std::size_t d = cfg.d_given ? cfg.d : 128;
  const std::size_t heads = cfg.K_given ? cfg.K : 8;
  const std::size_t p = cfg.p_given ? cfg.p : 16;
  const std::vector<std::size_t> grid =
      cfg.n_grid.empty() ? std::vector<std::size_t>{1024, 2048, 4096, 8192, 16384}
                         : cfg.n_grid;
  const BenchPrecision prec =
      cfg.precision == "single" ? BenchPrecision::f32 : BenchPrecision::f64;

  std::vector<BenchOp> ops;
  if (cfg.op == "all")
    ops = {BenchOp::tssa, BenchOp::causal_tssa, BenchOp::sdpa};
  else if (cfg.op == "tssa")
    ops = {BenchOp::tssa};
  else if (cfg.op == "causal")
    ops = {BenchOp::causal_tssa};
  else if (cfg.op == "sdpa")
    ops = {BenchOp::sdpa};
  else
    throw SpecError("bench: op must be all, tssa, causal, or sdpa");

  std::printf("bench seed=%llu d=%zu K=%zu p=%zu reps=%zu threads=%d precision=%s\n",
              static_cast<unsigned long long>(cfg.seed), d, heads, p, cfg.reps,
              cfg.threads, cfg.precision.c_str());

  std::string csv;
  json reports = json::array();
  bool windows_ok = true;
  for (BenchOp op : ops) {
    const BenchReport r =
        bench_scaling(op, grid, d, heads, p, cfg.reps, cfg.seed, prec, cfg.threads);
    std::printf("op=%s slope=%s\n", r.op.c_str(), fmt(r.slope).c_str());
    const std::string one = bench_csv(r);
    if (csv.empty())
      csv = one;
    else
      csv += one.substr(one.find('\n') + 1);  // keep a single header row
    reports.push_back(json::parse(bench_json(r)));

    const double lo = op == BenchOp::sdpa ? 1.7 : 0.8;
    const double hi = op == BenchOp::sdpa ? 2.3 : 1.3;
    if (r.slope < lo || r.slope > hi) {
      windows_ok = false;
      if (cfg.assert_windows)
        std::printf("  slope %s outside [%s, %s]\n", fmt(r.slope).c_str(),
                    fmt(lo).c_str(), fmt(hi).c_str());
    }
  }

  json j = {{"schema_version", kReportSchemaVersion},
            {"kind", "bench"},
            {"seed", cfg.seed},
            {"reports", reports}};
  emit(cfg, "bench_report", csv, j);

  if (cfg.assert_windows && !windows_ok) {
    std::printf("FAIL: slope outside acceptance window\n");
    return 1;
  }
  std::printf(cfg.assert_windows ? "PASS\n" : "done\n");
  return 0;
}

// --------------------------------------------------------------- config merge

struct Binding {
  CLI::Option* opt = nullptr;
  std::function<void(const json&)> apply;
};

void merge_config_file(const std::string& path,
                       std::map<std::string, Binding>& bindings) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw SpecError("cannot open config file: " + path);
  std::string text;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, got);
  std::fclose(f);

  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SpecError("config file is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw SpecError("config file must hold a JSON object");

  for (const auto& [key, value] : j.items()) {
    std::string norm = key;
    std::replace(norm.begin(), norm.end(), '-', '_');
    const auto it = bindings.find(norm);
    if (it == bindings.end()) throw SpecError("unknown config key: " + key);
    if (it->second.opt->count() > 0) continue;  // explicit flag wins
    try {
      it->second.apply(value);
    } catch (const json::exception&) {
      throw SpecError("config key has wrong type: " + key);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;

  if (const char* env = std::getenv("TOST_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      std::fprintf(stderr, "TOST_THREADS must be a positive integer, got '%s'\n",
                   env);
      return 2;
    }
    cfg.threads = static_cast<int>(v);
  }

  CLI::App app{"token-statistics attention verification suites and benchmarks"};
  app.set_help_flag("--help", "print usage");  // frees -h/--h for the mlp width
  app.require_subcommand(1);

  std::map<std::string, Binding> bindings;
  auto bind = [&](CLI::Option* opt, const std::string& key,
                  std::function<void(const json&)> apply) {
    bindings[key] = Binding{opt, std::move(apply)};
  };

  bind(app.add_option("--d", cfg.d, "feature dimension"), "d",
       [&](const json& v) { cfg.d = v.get<std::size_t>(); cfg.d_given = true; });
  bind(app.add_option("--p", cfg.p, "projection dimension per head"), "p",
       [&](const json& v) { cfg.p = v.get<std::size_t>(); cfg.p_given = true; });
  bind(app.add_option("--K", cfg.K, "head/group count"), "K",
       [&](const json& v) { cfg.K = v.get<std::size_t>(); cfg.K_given = true; });
  bind(app.add_option("--n", cfg.n, "token count"), "n",
       [&](const json& v) { cfg.n = v.get<std::size_t>(); cfg.n_given = true; });
  bind(app.add_option("--L", cfg.L, "layer count"), "L",
       [&](const json& v) { cfg.L = v.get<std::size_t>(); });
  bind(app.add_option("--h", cfg.h, "mlp hidden width"), "h",
       [&](const json& v) { cfg.h = v.get<std::size_t>(); });
  bind(app.add_option("--tau", cfg.tau, "attention step size"), "tau",
       [&](const json& v) { cfg.tau = v.get<double>(); cfg.tau_given = true; });
  bind(app.add_option("--eta", cfg.eta, "membership temperature"), "eta",
       [&](const json& v) { cfg.eta = v.get<double>(); });
  bind(app.add_option("--epsilon", cfg.epsilon, "rate distortion (alpha = d/eps^2)"),
       "epsilon", [&](const json& v) { cfg.epsilon = v.get<double>(); });
  bind(app.add_option("--noise-std", cfg.noise_std, "ambient noise level"),
       "noise_std", [&](const json& v) { cfg.noise_std = v.get<double>(); });
  bind(app.add_option("--seed", cfg.seed, "rng seed (echoed in reports)"), "seed",
       [&](const json& v) { cfg.seed = v.get<std::uint64_t>(); });
  bind(app.add_option("--trials", cfg.trials, "trial count (default per command)"),
       "trials",
       [&](const json& v) { cfg.trials = v.get<std::size_t>(); cfg.trials_given = true; });
  bind(app.add_option("--output", cfg.output, "report file path"), "output",
       [&](const json& v) { cfg.output = v.get<std::string>(); });
  bind(app.add_option("--format", cfg.format, "report format: csv or json"),
       "format", [&](const json& v) { cfg.format = v.get<std::string>(); });
  bind(app.add_option("--threads", cfg.threads, "worker thread count"), "threads",
       [&](const json& v) { cfg.threads = v.get<int>(); });

  app.add_option("--config", cfg.config_path, "JSON config file (flags override)");

  CLI::App* bound = app.add_subcommand("bound-check",
                                       "variational upper bound trials");
  CLI::App* grad = app.add_subcommand("grad-check",
                                      "closed-form gradient vs finite differences");
  CLI::App* equiv = app.add_subcommand("equivalence",
                                       "operator identity and causality checks");
  CLI::App* layer = app.add_subcommand("layerwise",
                                       "per-layer compression trace");
  CLI::App* bench = app.add_subcommand("bench", "scaling benchmark");
  for (CLI::App* sub : {bound, grad, equiv, layer, bench}) sub->fallthrough();

  bind(grad->add_flag("--inject-sign-flip", cfg.inject_sign_flip,
                      "negate the analytic gradient (checker self-test)"),
       "inject_sign_flip",
       [&](const json& v) { cfg.inject_sign_flip = v.get<bool>(); });
  bind(layer->add_option("--mode", cfg.mode, "bank refresh mode: oracle or fixed"),
       "mode", [&](const json& v) { cfg.mode = v.get<std::string>(); });
  bind(bench->add_option("--op", cfg.op, "all, tssa, causal, or sdpa"), "op",
       [&](const json& v) { cfg.op = v.get<std::string>(); });
  bind(bench->add_option("--n-grid", cfg.n_grid, "token counts to time")
           ->delimiter(','),
       "n_grid", [&](const json& v) { cfg.n_grid = v.get<std::vector<std::size_t>>(); });
  bind(bench->add_option("--reps", cfg.reps, "timed repetitions per cell"), "reps",
       [&](const json& v) { cfg.reps = v.get<std::size_t>(); });
  bind(bench->add_flag("--assert", cfg.assert_windows,
                       "exit 1 when slopes leave their windows"),
       "assert", [&](const json& v) { cfg.assert_windows = v.get<bool>(); });
  bind(bench->add_option("--precision", cfg.precision, "double or single"),
       "precision", [&](const json& v) { cfg.precision = v.get<std::string>(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (!cfg.config_path.empty()) merge_config_file(cfg.config_path, bindings);

    cfg.d_given = cfg.d_given || bindings["d"].opt->count() > 0;
    cfg.p_given = cfg.p_given || bindings["p"].opt->count() > 0;
    cfg.K_given = cfg.K_given || bindings["K"].opt->count() > 0;
    cfg.n_given = cfg.n_given || bindings["n"].opt->count() > 0;
    cfg.tau_given = cfg.tau_given || bindings["tau"].opt->count() > 0;
    cfg.trials_given = cfg.trials_given || bindings["trials"].opt->count() > 0;

    if (cfg.d == 0 || cfg.p == 0 || cfg.K == 0 || cfg.n == 0 || cfg.h == 0)
      throw SpecError("dimensions must be >= 1");
    if (cfg.format != "csv" && cfg.format != "json")
      throw SpecError("format must be csv or json");
    if (cfg.precision != "double" && cfg.precision != "single")
      throw SpecError("precision must be double or single");
    if (cfg.threads < 1) throw SpecError("threads must be >= 1");
    set_threads(cfg.threads);

    if (app.got_subcommand(bound)) return cmd_bound_check(cfg);
    if (app.got_subcommand(grad)) return cmd_grad_check(cfg);
    if (app.got_subcommand(equiv)) return cmd_equivalence(cfg);
    if (app.got_subcommand(layer)) return cmd_layerwise(cfg);
    if (app.got_subcommand(bench)) return cmd_bench(cfg);
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
