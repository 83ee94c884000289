#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "polylab/block_covariance.hpp"
#include "polylab/environment.hpp"
#include "polylab/localization.hpp"
#include "polylab/polymer.hpp"
#include "polylab/stats.hpp"

namespace polylab {

// Change of measure for the drift h(s) = min(2s/t,1) 2k t^alpha: density
// M_t(b) = exp(-b_{t/2} 4k t^{alpha-1} - 4 k^2 t^{2alpha-1}) and the uniform
// penalty exp(-4(k+k^2) t^{2alpha-1}) valid when |b_{t/2}| <= t^alpha.
struct GirsanovShift {
  ShiftProfile profile;

  double slope() const {
    return 4.0 * double(profile.k) * std::pow(profile.t, profile.alpha - 1.0);
  }
  // exp(-4(|k| + k^2) t^{2a-1}); |k| rather than k so the bound stays uniform
  // over the central block for shifts in both directions
  double log_penalty() const {
    const double k = std::abs(profile.k);
    return -4.0 * (k + k * k) * std::pow(profile.t, 2.0 * profile.alpha - 1.0);
  }
  double penalty() const { return std::exp(log_penalty()); }

  double log_density_at_midpoint(double b_half) const {
    const double k = profile.k;
    return -b_half * slope() -
           4.0 * k * k * std::pow(profile.t, 2.0 * profile.alpha - 1.0);
  }
};

inline GirsanovShift make_girsanov_shift(int k, double t, double alpha) {
  return GirsanovShift{ShiftProfile::ramped(k, t, alpha)};
}

// b'_s = b_s - h(s); maps L_k paths to L_0 paths on [t/2, t].
inline Path shift_path(const Path& path, const ShiftProfile& profile) {
  Path out;
  out.dt = path.dt;
  out.values.resize(path.values.size());
  for (std::size_t i = 0; i < path.values.size(); ++i)
    out.values[i] = path.values[i] - profile.h(double(i) * path.dt);
  return out;
}

inline Path unshift_path(const Path& path, const ShiftProfile& profile) {
  Path out;
  out.dt = path.dt;
  out.values.resize(path.values.size());
  for (std::size_t i = 0; i < path.values.size(); ++i)
    out.values[i] = path.values[i] + profile.h(double(i) * path.dt);
  return out;
}

inline double path_midpoint(const Path& path) {
  return path.values[path.values.size() / 2];
}

inline double girsanov_density(const Path& path, const GirsanovShift& shift) {
  return std::exp(shift.log_density_at_midpoint(path_midpoint(path)));
}

struct EntropicBoundReport {
  int k = 0;
  double t = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double log_penalty = 0.0;
  std::size_t n_fields = 0;
  std::size_t n_paths = 0;
  std::size_t support_paths = 0;   // paths in L_0, summed over fields
  std::size_t violations = 0;      // pathwise lhs < penalty * rhs beyond tol
  std::size_t inconclusive_fields = 0;
  double min_log_margin = 0.0;     // min over paths of log(lhs) - log(pen*rhs)
  double lhs_log_mean = 0.0;       // Z~(k, W) estimate, last field
  double rhs_log_mean = 0.0;       // log_penalty + Z~(0, W^{k,t}), last field
  bool conclusive = false;
  bool ok = false;
};

// Numerical check of the entropic bound Z~(k,W) >= exp(-4(k+k^2)t^{2a-1})
// Z~(0,W^{k,t}) by common random numbers. Z~(k,W) is estimated through the
// exact discrete Girsanov identity (paths sampled in L_0, reweighted by M_t),
// so each sampled path yields a pathwise comparison whose only slack is the
// truncation-window edge of the delta.eta sums; `rel_tol` covers it.
inline EntropicBoundReport verify_entropic_bound(
    const Kernel& kernel, const BlockGeometry& geom, int k, double beta,
    std::size_t n_fields, std::size_t n_paths, std::uint64_t seed,
    double dt = 0.0, double rel_tol = 1e-3) {
  if (n_fields == 0 || n_paths == 0)
    throw std::invalid_argument("verify_entropic_bound: sizes must be >= 1");
  const double t = geom.t;
  if (dt <= 0.0) {
    // pick dt so the ramp advances an integer number of steps per half-life
    dt = t / 1600.0;
  }
  const GirsanovShift shift = make_girsanov_shift(k, t, geom.alpha);
  const ShiftProfile profile = shift.profile;

  // Ramp-aligned grid: dx equals the ramp advance per step, so every row shift
  // is an exact column roll and the CRN comparison is pathwise-deterministic.
  const double dx_ramp = std::fabs(shift.slope()) * dt;
  const std::vector<Path> paths = sample_paths(n_paths, t, dt, seed);
  double reach = 0.0;
  for (const Path& p : paths) reach = std::max(reach, p.sup_abs());
  const BlockGeometry cover{t, geom.alpha, geom.trunc + std::abs(k)};
  const double plateau = profile.plateau();
  const double lo_needed = std::min(cover.block_lo(-cover.trunc),
                                    -reach - std::max(0.0, -plateau) - 1.0);
  const double hi_needed = std::max(cover.block_hi(cover.trunc),
                                    reach + std::max(0.0, plateau) + 1.0);
  const double width = 2.0 * cover.block_scale();
  std::size_t cols_per_block =
      static_cast<std::size_t>(std::llround(width / dx_ramp));
  if (cols_per_block < 2 ||
      std::fabs(width / dx_ramp - double(cols_per_block)) > 1e-6) {
    // ramp alignment impossible (n_steps not divisible); fall back to a plain
    // aligned grid and let rel_tol absorb the ramp interpolation
    cols_per_block = 256;
  }
  const double dx = width / double(cols_per_block);
  const auto pad_lo = static_cast<std::size_t>(
      std::ceil((cover.block_lo(-cover.trunc) - lo_needed) / dx)) + 2;
  const auto pad_hi = static_cast<std::size_t>(
      std::ceil((hi_needed - cover.block_hi(cover.trunc)) / dx)) + 2;
  const std::size_t n_cols = static_cast<std::size_t>(cover.size()) * cols_per_block +
                             pad_lo + pad_hi + 1;
  const SpaceGrid grid{cover.block_lo(-cover.trunc) - double(pad_lo) * dx, dx,
                       n_cols};

  const BlockMatrix C = covariance_matrix(kernel, geom);

  EntropicBoundReport rep;
  rep.k = k;
  rep.t = t;
  rep.alpha = geom.alpha;
  rep.beta = beta;
  rep.log_penalty = shift.log_penalty();
  rep.n_fields = n_fields;
  rep.n_paths = n_paths;
  rep.min_log_margin = 1e300;

  const double log_tol = std::log1p(rel_tol);
  for (std::size_t f = 0; f < n_fields; ++f) {
    const FieldRealization field =
        sample_field(kernel, grid, t, dt, substream_seed(seed ^ 0x6115a30fULL, f));
    const FieldRealization shifted = shift_environment(field, profile);
    const EtaVector eta_w = eta_blocks(field, geom);
    const EtaVector eta_wk = eta_blocks(shifted, geom);

    std::vector<double> log_lhs, log_rhs;
    bool any_support = false;
    for (const Path& c : paths) {
      if (!path_in_block(c, geom, 0)) continue;
      any_support = true;
      const Path ck = unshift_path(c, profile);  // lives in L_k on [t/2, t]
      const DeltaSolution d_lhs = delta_solve(C, v_vector(kernel, geom, ck));
      const DeltaSolution d_rhs = delta_solve(C, v_vector(kernel, geom, c));
      const double x_lhs =
          minus_hamiltonian(field, ck) - delta_eta_sum(d_lhs, eta_w);
      const double x_rhs =
          minus_hamiltonian(shifted, c) - delta_eta_sum(d_rhs, eta_wk);
      const double ll = shift.log_density_at_midpoint(c.values[c.values.size() / 2]) +
                        beta * x_lhs;
      const double lr = beta * x_rhs;
      log_lhs.push_back(ll);
      log_rhs.push_back(lr);
      ++rep.support_paths;
      const double margin = ll - (rep.log_penalty + lr);
      rep.min_log_margin = std::min(rep.min_log_margin, margin);
      if (margin < -log_tol) ++rep.violations;
    }
    if (!any_support) {
      ++rep.inconclusive_fields;
      continue;
    }
    rep.lhs_log_mean = log_mean_exp(log_lhs).log_mean - std::log(double(n_paths) / double(log_lhs.size()));
    rep.rhs_log_mean = rep.log_penalty + log_mean_exp(log_rhs).log_mean -
                       std::log(double(n_paths) / double(log_rhs.size()));
  }
  rep.conclusive = rep.inconclusive_fields < n_fields;
  rep.ok = rep.conclusive && rep.violations == 0;
  return rep;
}

struct ProbeResult {
  std::string name;
  double statistic = 0.0;
  double p_value = 1.0;
  bool pass = true;
};

struct ShiftLawReport {
  int k = 0;
  double level = 0.01;
  std::size_t n_probes = 0;
  std::vector<ProbeResult> probes;
  bool degenerate = false;  // k == 0: identical pools, test skipped
  bool all_pass = true;
};

// Two-sample KS between probe statistics of W and of W^{k,t} built from an
// independent pool; the two fields are equal in law, so every probe should
// pass, Bonferroni-adjusted.
inline ShiftLawReport verify_shift_law(const Kernel& kernel,
                                       const BlockGeometry& geom, double dt,
                                       int k, std::size_t n_replicas,
                                       std::uint64_t seed, double level = 0.01) {
  ShiftLawReport rep;
  rep.k = k;
  rep.level = level;
  if (k == 0) {
    rep.degenerate = true;
    return rep;
  }
  const double t = geom.t;
  const ShiftProfile profile = ShiftProfile::ramped(k, t, geom.alpha);
  const BlockGeometry cover{t, geom.alpha, geom.trunc + std::abs(k)};
  const std::size_t margin = 8;
  const SpaceGrid grid = make_block_aligned_grid(
      cover, 2.0 * cover.block_scale() / 64.0, margin);

  // probes: point increments of W at t (cumulative over rows), eta_0, eta_1,
  // eta_{-1}, and the second-half block-0 partial sum
  const std::size_t n_probes = 5;
  std::vector<std::vector<double>> pool_w(n_probes), pool_wk(n_probes);
  auto probe_values = [&](const FieldRealization& f, const BlockGeometry& g,
                          std::vector<std::vector<double>>& sink) {
    const EtaVector eta = eta_blocks(f, g);
    const std::size_t j_centre =
        static_cast<std::size_t>(std::llround((0.0 - f.grid().x0) / f.grid().dx));
    double w_t0 = 0.0, w_half = 0.0;
    for (std::size_t i = 0; i < f.n_rows(); ++i) {
      w_t0 += f.at(i, j_centre);
      if (i >= f.n_rows() / 2) w_half += f.at(i, j_centre);
    }
    sink[0].push_back(w_t0);
    sink[1].push_back(eta.eta.at(0));
    sink[2].push_back(eta.eta.at(1));
    sink[3].push_back(eta.eta.at(-1));
    sink[4].push_back(w_half);
  };
  for (std::size_t r = 0; r < n_replicas; ++r) {
    const FieldRealization w =
        sample_field(kernel, grid, t, dt, substream_seed(seed, r));
    probe_values(w, geom, pool_w);
    const FieldRealization w2 = sample_field(
        kernel, grid, t, dt, substream_seed(seed ^ 0xabcdef1234ULL, r));
    const FieldRealization wk = shift_environment(w2, profile);
    probe_values(wk, geom, pool_wk);
  }
  const char* names[n_probes] = {"W(t,0)", "eta_0", "eta_1", "eta_-1",
                                 "W_half(0)"};
  rep.n_probes = n_probes;
  for (std::size_t p = 0; p < n_probes; ++p) {
    const KsResult ks = ks_two_sample(pool_w[p], pool_wk[p]);
    ProbeResult pr;
    pr.name = names[p];
    pr.statistic = ks.statistic;
    pr.p_value = ks.p_value;
    pr.pass = ks.p_value >= level / double(n_probes);
    rep.all_pass = rep.all_pass && pr.pass;
    rep.probes.push_back(pr);
  }
  return rep;
}

}  // namespace polylab
