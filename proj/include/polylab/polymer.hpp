#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "polylab/block_covariance.hpp"
#include "polylab/environment.hpp"
#include "polylab/rng.hpp"

namespace polylab {

// Discretized standard Brownian path started at 0: values b_0..b_N at i*dt.
struct Path {
  double dt = 0.0;
  std::vector<double> values;

  double t() const { return dt * double(values.size() - 1); }
  std::size_t n_steps() const { return values.size() - 1; }
  double sup_abs() const {
    double s = 0.0;
    for (double v : values) s = std::max(s, std::fabs(v));
    return s;
  }
  // sup over the second half [t/2, t] of the grid.
  double sup_abs_second_half() const {
    double s = 0.0;
    for (std::size_t i = values.size() / 2; i < values.size(); ++i)
      s = std::max(s, std::fabs(values[i]));
    return s;
  }
};

inline std::vector<Path> sample_paths(std::size_t n, double t, double dt,
                                      std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_paths: n must be >= 1");
  const double steps_f = t / dt;
  const auto n_steps = static_cast<std::size_t>(std::llround(steps_f));
  if (n_steps == 0 || std::fabs(steps_f - double(n_steps)) > 1e-9 * steps_f)
    throw std::invalid_argument("sample_paths: dt must divide t");
  const double sq = std::sqrt(dt);
  std::vector<Path> paths(n);
  for (std::size_t p = 0; p < n; ++p) {
    Rng rng(substream_seed(seed, p));
    Path& path = paths[p];
    path.dt = dt;
    path.values.resize(n_steps + 1);
    path.values[0] = 0.0;
    for (std::size_t i = 0; i < n_steps; ++i)
      path.values[i + 1] = path.values[i] + sq * rng.normal();
  }
  return paths;
}

// b stays in I_k on [t/2, t] (grid convention: indices i >= N/2, half-open
// block interval). The events are disjoint across k by construction.
inline bool path_in_block(const Path& path, const BlockGeometry& geom, int k) {
  const double lo = geom.block_lo(k);
  const double hi = geom.block_hi(k);
  for (std::size_t i = path.values.size() / 2; i < path.values.size(); ++i) {
    const double v = path.values[i];
    if (v < lo || v >= hi) return false;
  }
  return true;
}

// Returns -H_t(b) = sum_i W((i dt, (i+1) dt], b_{s_i}) with left-endpoint
// evaluation s_i = i dt (Ito forward convention). The sign is the exponent of
// the Gibbs weight: exp(-beta H) = exp(beta * minus_hamiltonian).
inline double minus_hamiltonian(const FieldRealization& field, const Path& path) {
  if (std::fabs(field.dt() - path.dt) > 1e-12 * field.dt())
    throw std::invalid_argument("minus_hamiltonian: dt mismatch");
  if (path.n_steps() != field.n_rows())
    throw std::invalid_argument("minus_hamiltonian: horizon mismatch");
  const SpaceGrid& g = field.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < field.n_rows(); ++i) {
    const double x = path.values[i];
    const double u = (x - g.x0) / g.dx;
    if (u < 0.0 || u > double(g.n - 1))
      throw std::out_of_range("minus_hamiltonian: path exits the field grid");
    std::size_t j = static_cast<std::size_t>(u);
    if (j >= g.n - 1) j = g.n - 2;
    const double w = u - double(j);
    const double* r = field.row(i);
    acc += (1.0 - w) * r[j] + w * r[j + 1];
  }
  return acc;
}

inline std::vector<double> minus_hamiltonians(const FieldRealization& field,
                                              std::span<const Path> paths) {
  std::vector<double> out(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i)
    out[i] = minus_hamiltonian(field, paths[i]);
  return out;
}

// Monte Carlo average of exponentials, carried in the log domain via max
// shift so nothing overflows. `support` counts the terms with a true flag.
struct LogMcEstimate {
  double log_mean = -std::numeric_limits<double>::infinity();
  double rel_std_err = 0.0;
  std::size_t n = 0;
  std::size_t support = 0;
  bool low_support = false;

  double value() const { return std::exp(log_mean); }
  bool is_zero() const { return support == 0; }
};

inline LogMcEstimate log_mean_exp(std::span<const double> log_terms,
                                  std::span<const char> included = {}) {
  LogMcEstimate est;
  est.n = log_terms.size();
  if (est.n == 0) throw std::invalid_argument("log_mean_exp: empty sample");
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log_terms.size(); ++i) {
    if (!included.empty() && !included[i]) continue;
    ++est.support;
    m = std::max(m, log_terms[i]);
  }
  if (est.support == 0) {
    est.low_support = true;
    return est;  // estimate is exactly 0; log_mean = -inf, flagged
  }
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < log_terms.size(); ++i) {
    if (!included.empty() && !included[i]) continue;
    const double e = std::exp(log_terms[i] - m);
    s1 += e;
    s2 += e * e;
  }
  est.log_mean = m + std::log(s1 / double(est.n));
  if (est.n > 1) {
    const double ratio = std::max(0.0, s2 / (s1 * s1) - 1.0 / double(est.n));
    est.rel_std_err = std::sqrt(ratio * double(est.n) / double(est.n - 1));
  }
  est.low_support = est.support < std::max<std::size_t>(1, est.n / 100);
  return est;
}

// Z_t estimate (1/n) sum exp(beta * mh_i), with relative standard error.
inline LogMcEstimate partition_function(const FieldRealization& field,
                                        std::span<const Path> paths,
                                        double beta) {
  const std::vector<double> mh = minus_hamiltonians(field, paths);
  std::vector<double> lw(mh.size());
  for (std::size_t i = 0; i < mh.size(); ++i) lw[i] = beta * mh[i];
  return log_mean_exp(lw);
}

inline LogMcEstimate partition_from_log_weights(std::span<const double> lw) {
  return log_mean_exp(lw);
}

// Z_t^alpha(k): same estimator restricted to the event L_k. Returns a
// zero-support estimate (value 0, flag set) when no path lands in L_k.
inline LogMcEstimate restricted_partition(const FieldRealization& field,
                                          std::span<const Path> paths,
                                          double beta, const BlockGeometry& geom,
                                          int k) {
  const std::vector<double> mh = minus_hamiltonians(field, paths);
  std::vector<double> lw(mh.size());
  std::vector<char> in(mh.size());
  for (std::size_t i = 0; i < mh.size(); ++i) {
    lw[i] = beta * mh[i];
    in[i] = path_in_block(paths[i], geom, k) ? 1 : 0;
  }
  return log_mean_exp(lw, in);
}

// Z~_t^alpha(k): restricted estimator of exp(beta (mh - sum_j delta_j eta_j));
// the per-path correction sum is supplied by the localization machinery.
inline LogMcEstimate modified_partition(const FieldRealization& field,
                                        std::span<const Path> paths, double beta,
                                        const BlockGeometry& geom, int k,
                                        std::span<const double> delta_eta) {
  if (delta_eta.size() != paths.size())
    throw std::invalid_argument("modified_partition: delta_eta size mismatch");
  const std::vector<double> mh = minus_hamiltonians(field, paths);
  std::vector<double> lw(mh.size());
  std::vector<char> in(mh.size());
  for (std::size_t i = 0; i < mh.size(); ++i) {
    lw[i] = beta * (mh[i] - delta_eta[i]);
    in[i] = path_in_block(paths[i], geom, k) ? 1 : 0;
  }
  return log_mean_exp(lw, in);
}

// Self-normalized importance sample of the polymer measure at inverse
// temperature beta: weights proportional to exp(beta * mh_i).
struct GibbsEnsemble {
  std::span<const Path> paths;
  std::vector<double> minus_h;
  double beta = 0.0;
  std::vector<double> weights;  // normalized, sum to 1
  double ess = 0.0;             // 1 / sum w_i^2
  double ess_floor = 30.0;
};

inline GibbsEnsemble make_gibbs_ensemble(const FieldRealization& field,
                                         std::span<const Path> paths,
                                         double beta, double ess_floor = 30.0) {
  if (paths.empty())
    throw std::invalid_argument("make_gibbs_ensemble: no paths");
  GibbsEnsemble ens;
  ens.paths = paths;
  ens.beta = beta;
  ens.ess_floor = ess_floor;
  ens.minus_h = minus_hamiltonians(field, paths);
  ens.weights.resize(paths.size());
  double m = -std::numeric_limits<double>::infinity();
  for (double mh : ens.minus_h) m = std::max(m, beta * mh);
  double s = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    ens.weights[i] = std::exp(beta * ens.minus_h[i] - m);
    s += ens.weights[i];
  }
  double w2 = 0.0;
  for (auto& w : ens.weights) {
    w /= s;
    w2 += w * w;
  }
  ens.ess = 1.0 / w2;
  return ens;
}

struct GibbsExpectation {
  double value = 0.0;
  double ess = 0.0;
  bool low_ess_warning = false;
};

inline GibbsExpectation gibbs_expectation(
    const GibbsEnsemble& ens, const std::function<double(const Path&)>& f) {
  GibbsExpectation out;
  for (std::size_t i = 0; i < ens.paths.size(); ++i)
    out.value += ens.weights[i] * f(ens.paths[i]);
  out.ess = ens.ess;
  out.low_ess_warning = ens.ess < ens.ess_floor;
  return out;
}

struct FreeEnergyEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_fields = 0;
};

// p_t(beta) = (1/t) E[log Z_t], averaged over field replicas. One path
// ensemble is shared across replicas (common random numbers); the W-average
// is what the standard error below measures.
inline FreeEnergyEstimate free_energy(const Kernel& kernel, double beta,
                                      double t, std::size_t n_fields,
                                      std::size_t n_paths, double dt,
                                      std::uint64_t seed,
                                      const std::string& cache_dir = {}) {
  if (n_fields == 0 || n_paths == 0)
    throw std::invalid_argument("free_energy: sizes must be >= 1");
  const std::vector<Path> paths = sample_paths(n_paths, t, dt, seed);
  double reach = 0.0;
  for (const Path& p : paths) reach = std::max(reach, p.sup_abs());
  const double dx = 0.02;
  const double half = reach + 1.0;
  const auto n_cols = static_cast<std::size_t>(std::ceil(2.0 * half / dx)) + 1;
  const SpaceGrid grid = make_grid(-half, dx, n_cols);
  std::vector<double> log_z(n_fields);
  for (std::size_t f = 0; f < n_fields; ++f) {
    const FieldRealization field =
        sample_field_cached(kernel, grid, t, dt,
                            substream_seed(seed ^ 0x5eedf1e1dULL, f), cache_dir);
    log_z[f] = partition_function(field, paths, beta).log_mean;
  }
  const MeanVar mv = mean_var(log_z);
  return {mv.mean / t, mv.std_error() / t, n_fields};
}

}  // namespace polylab
